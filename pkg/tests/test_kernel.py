import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from conftest import make_instance
from oracle import dense_h0, dense_run, dense_walsh
from qsat.errors import CapabilityError, DegenerateWeightError, StateError
from qsat.instances import Clause, Instance, enumerate_solutions, generate_soluble_ensemble
from qsat.kernel import (
    MAX_QUBITS, CostProblem, MixingWeights, QuantumState, apply_cost_phase, apply_mixing_phase,
    basis_state, dump_state, evolve, load_state, make_weights, solution_probability, step,
    uniform_state, walsh_hadamard,
)
from qsat.schedules import linear_adiabatic, run_schedule


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return QuantumState(n, a / np.linalg.norm(a))


@pytest.fixture(scope="module")
def small_ensemble():
    return generate_soluble_ensemble(6, 6, seed=4)


def test_uniform_state():
    assert np.allclose(uniform_state(1).amps, [2**-0.5, 2**-0.5])
    psi = uniform_state(20)
    assert np.all(psi.amps == 2.0**-10)
    assert np.all(psi.amps.imag == 0)
    assert abs(psi.norm2() - 1) < 1e-12
    with pytest.raises(CapabilityError):
        uniform_state(MAX_QUBITS + 1)
    with pytest.raises(CapabilityError):
        uniform_state(0)


def test_weight_modes():
    inst = generate_soluble_ensemble(20, 1, seed=1)[0]
    assert inst.m == 85
    u = make_weights(inst)
    assert u.omega == 20 and np.all(u.w == 1)
    c = make_weights(inst, "clause-count")
    assert c.omega == 255
    z = make_weights(inst, "normalized")
    assert np.isclose(z.w.mean(), 1.0) and np.isclose(z.omega, 20)


def test_unused_variable_is_degenerate():
    inst = make_instance(4, [[1, 2, 3]])
    with pytest.raises(DegenerateWeightError):
        make_weights(inst, "clause-count")
    with pytest.raises(DegenerateWeightError):
        MixingWeights.from_weights([1.0, 0.0])


@pytest.mark.parametrize("mode", ["unweighted", "clause-count", "normalized"])
def test_weight_diagonal(mode, small_ensemble):
    w = make_weights(small_ensemble[0], mode)
    N = 2**w.n
    expect = [sum(w.w[i] for i in range(w.n) if r >> i & 1) for r in range(N)]
    assert np.allclose(w.diagonal(), expect, atol=1e-12)


def test_walsh_hadamard():
    assert np.allclose(walsh_hadamard(uniform_state(5)).amps, basis_state(5, 0).amps, atol=1e-15)
    psi = random_state(8, 0)
    orig = psi.amps.copy()
    walsh_hadamard(psi)
    assert np.max(np.abs(psi.amps - dense_walsh(8) @ orig)) < 1e-12
    walsh_hadamard(psi)
    assert np.max(np.abs(psi.amps - orig)) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3, 7, 10, 11])
def test_walsh_hadamard_odd_and_even_depth(n):
    # radix-4 passes with and without the radix-2 tail
    psi = random_state(n, n)
    ref = sla.hadamard(2**n) @ psi.amps / 2 ** (n / 2)
    assert np.max(np.abs(walsh_hadamard(psi).amps - ref)) < 1e-12


def test_cost_phase(small_ensemble):
    inst = small_ensemble[0]
    psi = random_state(6, 1)
    orig = psi.amps.copy()
    apply_cost_phase(psi, inst, 0.0)
    assert np.array_equal(psi.amps, orig)
    apply_cost_phase(psi, inst, 0.73)
    ref = np.exp(-0.73j * inst.cost_table().astype(float)) * orig
    assert np.max(np.abs(psi.amps - ref)) < 1e-12
    assert np.array_equal(psi.amps[inst.solutions], orig[inst.solutions])


@pytest.mark.parametrize("mode", ["unweighted", "clause-count", "normalized"])
def test_mixing_phase_matches_dense(mode, small_ensemble):
    w = make_weights(small_ensemble[1], mode)
    psi = random_state(6, 2)
    ref = sla.expm(-0.41j * dense_h0(w.w)) @ psi.amps
    assert np.max(np.abs(apply_mixing_phase(psi, w, 0.41).amps - ref)) < 1e-10


def test_mixing_phase_fixes_uniform():
    w = MixingWeights.from_weights([0.5, 1.5, 2.0])
    psi = apply_mixing_phase(uniform_state(3), w, 1.7)
    assert np.allclose(psi.amps, uniform_state(3).amps, atol=1e-14)
    psi = random_state(3, 3)
    orig = psi.amps.copy()
    assert np.allclose(apply_mixing_phase(psi, w, 0.0).amps, orig, atol=1e-14)


def test_step_matches_dense(small_ensemble):
    inst = small_ensemble[2]
    w = make_weights(inst)
    psi = random_state(6, 4)
    tau, rho, delta = 0.3, 0.8, 0.9
    ref = sla.expm(-1j * tau * delta * dense_h0(w.w)) @ (
        np.exp(-1j * rho * delta * inst.cost_table().astype(float)) * psi.amps)
    assert np.max(np.abs(step(psi, inst, w, tau, rho, delta).amps - ref)) < 1e-10


def test_step_identity_and_small_delta(small_ensemble):
    inst = small_ensemble[0]
    w = make_weights(inst)
    psi = random_state(6, 5)
    orig = psi.amps.copy()
    assert np.allclose(step(psi.copy(), inst, w, 0.0, 0.0, 1.0).amps, orig, atol=1e-14)
    d1 = np.linalg.norm(step(psi.copy(), inst, w, 1.0, 1.0, 1e-3).amps - orig)
    d2 = np.linalg.norm(step(psi.copy(), inst, w, 1.0, 1.0, 5e-4).amps - orig)
    assert d1 > 0 and abs(d1 / d2 - 2.0) < 0.01


@pytest.mark.parametrize("mode", ["unweighted", "clause-count"])
def test_full_run_matches_dense(mode, small_ensemble):
    inst = small_ensemble[3]
    w = make_weights(inst, mode)
    sched = linear_adiabatic(20)
    ca, ma = sched.angles()
    psi = uniform_state(6)
    evolve(psi, inst, w, ca, ma)
    ref = dense_run(inst.cost_table(), w.w, ca, ma)
    assert np.max(np.abs(psi.amps - ref)) < 1e-8


def test_evolve_trace_matches_final(small_ensemble):
    inst = small_ensemble[0]
    w = make_weights(inst)
    ca, ma = linear_adiabatic(30).angles()
    psi = uniform_state(6)
    tr = evolve(psi, inst, w, ca, ma, trace=True)
    assert tr.shape == (30,)
    assert tr[-1] == pytest.approx(solution_probability(psi, inst), abs=1e-14)


def test_solution_probability():
    inst = make_instance(3, [[1, -2], [2, 3]])
    assert solution_probability(uniform_state(3), inst) == pytest.approx(4 / 8)
    assert solution_probability(basis_state(3, inst.solutions[0]), inst) == 1.0
    no_sols = Instance(n=3, k=2, clauses=inst.clauses)
    with pytest.raises(StateError):
        solution_probability(uniform_state(3), no_sols)


def test_solution_probability_for_five_of_2_20():
    prob = CostProblem(20, np.ones(2**20, dtype=np.uint8), [3, 17, 99, 1000, 2**20 - 1])
    assert solution_probability(uniform_state(20), prob) == pytest.approx(5 / 2**20, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 2 * np.pi))
def test_global_phase_irrelevant(seed, phi):
    inst = make_instance(5, [[1, -2, 3], [-3, 4, 5], [2, -5, 1]])
    psi = random_state(5, seed)
    rotated = QuantumState(5, psi.amps * np.exp(1j * phi))
    assert solution_probability(rotated, inst) == pytest.approx(solution_probability(psi, inst), abs=1e-15)


def relabel(inst, perm, flips):
    clauses = [Clause(tuple(int(perm[v]) for v in c.vars),
                      tuple(neg != bool(flips[v]) for v, neg in zip(c.vars, c.negated)))
               for c in inst.clauses]
    out = Instance(n=inst.n, k=inst.k, clauses=clauses)
    enumerate_solutions(out)
    return out


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_symmetry_equivariance(seed):
    rng = np.random.default_rng(seed)
    inst = generate_soluble_ensemble(8, 1, seed=seed % 1000)[0]
    perm = rng.permutation(8)
    flips = rng.integers(0, 2, 8)
    other = relabel(inst, perm, flips)
    # the induced map on assignments carries solutions to solutions
    def image(s):
        return sum((((s >> i) & 1) ^ int(flips[i])) << int(perm[i]) for i in range(8))
    assert sorted(image(s) for s in inst.solutions) == other.solutions
    sched = linear_adiabatic(40)
    p1 = run_schedule(inst, make_weights(inst), sched).p_soln
    p2 = run_schedule(other, make_weights(other), sched).p_soln
    assert abs(p1 - p2) < 1e-12


def test_unitarity_long_run():
    inst = generate_soluble_ensemble(10, 1, seed=9)[0]
    res = run_schedule(inst, make_weights(inst), linear_adiabatic(1000))
    assert res.norm_drift < 1e-9


def test_state_dump_round_trip(tmp_path):
    psi = random_state(4, 7)
    dump_state(psi, tmp_path / "s.bin", step_index=12)
    back, k = load_state(tmp_path / "s.bin")
    assert k == 12 and np.array_equal(back.amps, psi.amps)
    (tmp_path / "bad.bin").write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(ValueError):
        load_state(tmp_path / "bad.bin")
