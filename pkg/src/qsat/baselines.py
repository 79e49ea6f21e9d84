"""Comparison methods: GSAT with restarts and analytic unstructured (Grover) search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .instances import Instance, substream


@dataclass(frozen=True)
class GsatConfig:
    max_flips_per_try: int | None = None   # default: n
    max_tries: int | None = None           # default: 1000 n
    seed: int = 0

    def resolved(self, n: int) -> tuple[int, int]:
        flips = n if self.max_flips_per_try is None else self.max_flips_per_try
        tries = 1000 * n if self.max_tries is None else self.max_tries
        if flips < 1 or tries < 1:
            raise ValueError("max_flips_per_try and max_tries must be >= 1")
        return flips, tries


@dataclass
class GsatResult:
    found: bool
    solution: int | None
    total_flips: int
    tries: int
    flip_log: list[tuple[int, int, int]] = field(default_factory=list)  # (assignment, var, delta)


class _ClauseState:
    """Clause arrays with incremental true-literal counts for one assignment."""

    def __init__(self, instance: Instance):
        self.n = instance.n
        m, k = instance.m, instance.k
        self.vars = np.array([c.vars for c in instance.clauses], dtype=np.int64).reshape(m, k)
        self.neg = np.array([c.negated for c in instance.clauses], dtype=bool).reshape(m, k)
        self.flat_vars = self.vars.ravel()

    def reset(self, x: np.ndarray):
        self.x = x
        self.lit = x[self.vars] != self.neg
        self.ntrue = self.lit.sum(axis=1)

    def cost(self) -> int:
        return int(np.count_nonzero(self.ntrue == 0))

    def deltas(self) -> np.ndarray:
        """Change in cost from flipping each variable."""
        breaks = self.lit & (self.ntrue == 1)[:, None]
        makes = np.broadcast_to((self.ntrue == 0)[:, None], self.lit.shape)
        contrib = breaks.astype(np.int64) - makes.astype(np.int64)
        return np.bincount(self.flat_vars, weights=contrib.ravel(), minlength=self.n).astype(np.int64)

    def flip(self, v: int):
        self.x[v] = ~self.x[v]
        hit = self.vars == v
        self.lit[hit] = ~self.lit[hit]
        self.ntrue = self.lit.sum(axis=1)


def gsat_solve(instance: Instance, config: GsatConfig = GsatConfig(),
               rng: np.random.Generator | None = None, log: bool = False) -> GsatResult:
    """Greedy local search with random restarts.

    Each try starts from a uniformly random assignment and repeatedly flips the
    variable giving the lowest resulting cost (ties broken uniformly, uphill and
    sideways moves allowed). Flips are counted across tries until the first
    solution.
    """
    n = instance.n
    flips_per_try, max_tries = config.resolved(n)
    if rng is None:
        rng = substream(config.seed)
    state = _ClauseState(instance)
    total = 0
    flip_log: list[tuple[int, int, int]] = []
    for t in range(1, max_tries + 1):
        state.reset(rng.integers(0, 2, size=n).astype(bool))
        cost = state.cost()
        if cost == 0:
            return GsatResult(True, _index(state.x), total, t, flip_log)
        for _ in range(flips_per_try):
            d = state.deltas()
            best = np.flatnonzero(d == d.min())
            v = int(best[rng.integers(best.size)]) if best.size > 1 else int(best[0])
            if log:
                flip_log.append((_index(state.x), v, int(d[v])))
            state.flip(v)
            cost += int(d[v])
            total += 1
            if cost == 0:
                return GsatResult(True, _index(state.x), total, t, flip_log)
    return GsatResult(False, None, total, max_tries, flip_log)


def _index(x: np.ndarray) -> int:
    return int(np.sum(x.astype(np.int64) << np.arange(x.size, dtype=np.int64)))


class GsatCost(NamedTuple):
    mean: float
    censored: int


def gsat_expected_cost(instance: Instance, config: GsatConfig = GsatConfig(),
                       trials: int = 100) -> GsatCost:
    """Mean flips to first solution over ``trials`` independent runs.

    A run that exhausts every try contributes ``max_tries * max_flips_per_try``
    and is counted in ``censored``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    flips_per_try, max_tries = config.resolved(instance.n)
    total, censored = 0, 0
    for t in range(trials):
        res = gsat_solve(instance, config, rng=substream(config.seed, t))
        if res.found:
            total += res.total_flips
        else:
            total += max_tries * flips_per_try
            censored += 1
    return GsatCost(total / trials, censored)


# --- unstructured search -------------------------------------------------------

GROWTH = 6 / 5


def _angle(n: int, S: int) -> float:
    N = 2**n
    if not 1 <= S <= N:
        raise ValueError(f"need 1 <= S <= 2**n, got S={S}")
    return math.asin(math.sqrt(S / N))


def grover_success_prob(n: int, S: int, t: int) -> float:
    """Solution probability after ``t`` Grover iterations with ``S`` marked states."""
    if t < 0:
        raise ValueError("t must be >= 0")
    theta = _angle(n, S)
    return math.sin((2 * t + 1) * theta) ** 2


def stage_success_prob(theta: float, M: int) -> float:
    """Success probability when the iteration count is uniform on ``0..M-1``.

    Closed form ``1/2 - sin(4 M theta) / (4 M sin(2 theta))``; at theta = pi/2
    every term equals 1.
    """
    s2 = math.sin(2 * theta)
    if abs(s2) < 1e-15:
        return math.sin(theta) ** 2
    return 0.5 - math.sin(4 * M * theta) / (4 * M * s2)


def grover_expected_cost(n: int, S: int, growth: float = GROWTH) -> float:
    """Expected Grover iterations for search with an unknown number of solutions.

    Stage ``l`` draws the iteration count uniformly from the integers below
    ``m_l = min(growth**l, sqrt(N))`` and stops on success. Once ``m`` is
    capped the stages repeat, so the tail is summed as a geometric series.
    """
    theta = _angle(n, S)
    cap = math.sqrt(2**n)
    expected, survive, m = 0.0, 1.0, 1.0
    while True:
        capped = m >= cap
        M = math.ceil(cap if capped else m)
        p = stage_success_prob(theta, M)
        e_stage = (M - 1) / 2
        if capped:
            return expected + survive * e_stage / p
        expected += survive * e_stage
        survive *= 1 - p
        if survive < 1e-300:
            return expected
        m *= growth
