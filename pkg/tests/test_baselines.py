import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_instance
from qsat.baselines import (
    GROWTH, GsatConfig, grover_expected_cost, grover_success_prob, gsat_expected_cost,
    gsat_solve, stage_success_prob,
)
from qsat.instances import Instance, cost, generate_soluble_ensemble


@pytest.fixture(scope="module")
def ens10():
    return generate_soluble_ensemble(10, 8, seed=5)


# --- GSAT -------------------------------------------------------------------------


def test_gsat_finds_genuine_solutions(ens10):
    for i, inst in enumerate(ens10):
        res = gsat_solve(inst, GsatConfig(seed=i))
        assert res.found
        assert cost(inst, res.solution) == 0
        assert res.solution in inst.solutions


def test_gsat_flip_choices_are_greedy(ens10):
    inst = ens10[0]
    res = gsat_solve(inst, GsatConfig(seed=3), log=True)
    assert len(res.flip_log) == res.total_flips
    for s, v, delta in res.flip_log:
        base = cost(inst, s)
        neighbours = [cost(inst, s ^ (1 << i)) - base for i in range(inst.n)]
        assert delta == neighbours[v] == min(neighbours)


def test_gsat_toy_from_all_false():
    inst = make_instance(3, [[1, -2], [2, 3]])
    # all-false violates only (v2 or v3); flipping v3 fixes it, flipping v2 breaks clause 1
    for seed in range(20):
        res = gsat_solve(inst, GsatConfig(seed=seed))
        assert res.found
    cfg = GsatConfig(max_flips_per_try=2, max_tries=1)

    class AllFalse:
        def __init__(self):
            self.inner = np.random.default_rng(1)

        def integers(self, lo, hi, size=None):
            if size is not None:
                return np.zeros(size, dtype=np.int64)
            return self.inner.integers(lo, hi)

    res = gsat_solve(inst, cfg, rng=AllFalse())
    assert res.found and res.total_flips <= 2


def test_gsat_zero_flips_when_start_solves():
    inst = Instance(n=4, k=3, clauses=[])
    res = gsat_solve(inst, GsatConfig(seed=0))
    assert res.found and res.total_flips == 0 and res.tries == 1
    assert gsat_expected_cost(inst, GsatConfig(), trials=5).mean == 0


def test_gsat_failure_is_explicit():
    inst = make_instance(1, [[1], [-1]])
    res = gsat_solve(inst, GsatConfig(max_flips_per_try=3, max_tries=4))
    assert not res.found and res.solution is None and res.total_flips == 12
    est = gsat_expected_cost(inst, GsatConfig(max_flips_per_try=3, max_tries=4), trials=3)
    assert est.censored == 3 and est.mean == 12


def test_gsat_deterministic(ens10):
    a = gsat_expected_cost(ens10[1], GsatConfig(seed=9), trials=10)
    b = gsat_expected_cost(ens10[1], GsatConfig(seed=9), trials=10)
    assert a == b
    with pytest.raises(ValueError):
        gsat_expected_cost(ens10[1], trials=0)


@pytest.mark.slow
def test_gsat_n20_well_below_long_adiabatic_cost():
    ens = generate_soluble_ensemble(20, 9, seed=1)
    costs = [gsat_expected_cost(inst, GsatConfig(seed=i), trials=10).mean for i, inst in enumerate(ens)]
    assert np.median(costs) < 8222 / 4


# --- unstructured search ------------------------------------------------------------


def test_grover_examples():
    assert grover_success_prob(6, 3, 0) == pytest.approx(3 / 64)
    assert grover_success_prob(4, 16, 0) == pytest.approx(1.0)
    theta = math.asin(math.sqrt(5 / 2**20))
    t = math.floor(math.pi / (4 * theta))
    assert t == 359
    assert grover_success_prob(20, 5, t) > 0.999
    with pytest.raises(ValueError):
        grover_success_prob(5, 0, 1)


@given(st.integers(1, 12), st.integers(0, 500), st.data())
def test_grover_probability_range(n, t, data):
    S = data.draw(st.integers(1, 2**n))
    assert 0.0 <= grover_success_prob(n, S, t) <= 1.0


def test_grover_period():
    theta = math.asin(math.sqrt(1 / 64))
    for t in range(0, 40, 3):
        assert grover_success_prob(6, 1, t + math.pi / theta) == pytest.approx(
            grover_success_prob(6, 1, t), abs=1e-12)


@pytest.mark.parametrize("n, S, M", [(6, 1, 1), (6, 1, 5), (8, 3, 17), (10, 1, 40), (5, 32, 3)])
def test_stage_probability_matches_direct_average(n, S, M):
    theta = math.asin(math.sqrt(S / 2**n))
    direct = np.mean([grover_success_prob(n, S, t) for t in range(M)])
    assert stage_success_prob(theta, M) == pytest.approx(direct, abs=1e-12)


def brute_expected_cost(n, S, growth=GROWTH, stages=4000):
    # stage-by-stage sum, with the iteration count averaged explicitly
    theta = math.asin(math.sqrt(S / 2**n))
    cap = math.sqrt(2**n)
    total, survive, m = 0.0, 1.0, 1.0
    for _ in range(stages):
        M = math.ceil(min(m, cap))
        ps = [math.sin((2 * t + 1) * theta) ** 2 for t in range(M)]
        total += survive * np.mean(range(M))
        survive *= 1 - np.mean(ps)
        m *= growth
    return total


@pytest.mark.parametrize("n, S", [(4, 1), (6, 1), (6, 5), (8, 2), (10, 1), (10, 7)])
def test_expected_cost_matches_stage_sum(n, S):
    assert grover_expected_cost(n, S) == pytest.approx(brute_expected_cost(n, S), rel=1e-9)


def test_expected_cost_examples():
    assert grover_expected_cost(6, 64) < 1.0
    ref = math.pi / 4 * math.sqrt(2**10)
    assert ref / 4 < grover_expected_cost(10, 1) < 4 * ref


@pytest.mark.parametrize("n", [4, 8, 10, 12])
def test_expected_cost_nonincreasing_in_s(n):
    # holds while S/N <= 1/4, which covers every SAT ensemble of interest
    top = 2**n // 4
    costs = [grover_expected_cost(n, S) for S in range(1, min(top, 400) + 1)]
    assert all(b <= a + 1e-12 for a, b in zip(costs, costs[1:]))


def test_expected_cost_not_monotone_near_half():
    # past theta = pi/6 the t=1 term sin^2(3 theta) falls with S, and the exact
    # stage sum picks up a small rise (about 2e-5 here)
    assert grover_expected_cost(8, 110) > grover_expected_cost(8, 109)
