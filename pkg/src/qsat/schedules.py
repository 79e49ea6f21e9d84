"""Schedule families for the discrete evolution and the runner that executes them."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .errors import StateError
from .kernel import MixingWeights, Problem, evolve, solution_probability, uniform_state

PhaseFn = Callable[[np.ndarray], np.ndarray]

LINEAR_TAU = Polynomial([1.0, -1.0])
LINEAR_RHO = Polynomial([0.0, 1.0])

# tuned cubic for constant-delta runs on n=12 random 3-SAT
CUBIC_DELTA = 1.31275
CUBIC_COEFFS = (0.0, 1.92708, -2.66179, 1.73471)

# Heuristic-method preset (an assumption, not a published schedule): constant-slope
# family tau = a(1-f), rho = b f with delta = 1/j. a, b come from a coarse grid
# scan minimizing median j/P_soln at j = n = 10 over 40 soluble instances.
HEURISTIC_PRESET = {"tau_scale": 16.0, "rho_scale": 12.0, "label": "constant-slope preset (local assumption, not a published form)"}


@dataclass(frozen=True)
class Schedule:
    family: str
    j: int
    delta: float
    tau: PhaseFn
    rho: PhaseFn
    f: np.ndarray
    grid: str = "linear"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.j < 0:
            raise ValueError("j must be >= 0")
        if not self.delta > 0 or not math.isfinite(self.delta):
            raise ValueError(f"delta must be positive and finite, got {self.delta}")
        f = np.asarray(self.f, dtype=np.float64)
        f.setflags(write=False)
        object.__setattr__(self, "f", f)
        if f.shape != (self.j,):
            raise ValueError(f"f-grid has {f.shape[0]} points for j={self.j}")
        if self.j and (f.min() <= 0.0 or f.max() >= 1.0):
            raise ValueError("f-grid must lie strictly inside (0, 1)")

    @property
    def total_time(self) -> float:
        return self.j * self.delta

    def angles(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-step (cost, mixing) phase angles ``rho(f) delta`` and ``tau(f) delta``."""
        f = self.f
        return (np.asarray(self.rho(f), dtype=np.float64) * self.delta,
                np.asarray(self.tau(f), dtype=np.float64) * self.delta)

    def describe(self) -> dict:
        out = {"family": self.family, "j": self.j, "delta": self.delta, "grid": self.grid}
        out.update(self.params)
        for name, fn in (("tau", self.tau), ("rho", self.rho)):
            if isinstance(fn, Polynomial):
                out[f"{name}_coef"] = [float(c) for c in fn.coef]
        return out


def linear_grid(j: int) -> np.ndarray:
    return np.arange(1, j + 1, dtype=np.float64) / (j + 1)


def linear_adiabatic(j: int, alpha: float = 0.5) -> Schedule:
    """tau = 1 - f, rho = f, delta = j**-alpha on the linear grid."""
    if j < 1:
        raise ValueError("j must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return Schedule("linear_adiabatic", j, j ** (-alpha), LINEAR_TAU, LINEAR_RHO,
                    linear_grid(j), params={"alpha": alpha})


def constant_delta(j: int, delta: float, tau: PhaseFn = LINEAR_TAU,
                   rho: PhaseFn = LINEAR_RHO) -> Schedule:
    return Schedule("constant_delta", j, float(delta), tau, rho, linear_grid(j))


def cubic_phase() -> Polynomial:
    return Polynomial(CUBIC_COEFFS)


def cubic_schedule(j: int) -> Schedule:
    p = cubic_phase()
    return Schedule("cubic", j, CUBIC_DELTA, 1 - p, p, linear_grid(j))


def heuristic_schedule(j: int, tau: PhaseFn | None = None, rho: PhaseFn | None = None) -> Schedule:
    """delta = 1/j with caller-supplied phase functions (preset when omitted)."""
    if j < 1:
        raise ValueError("j must be >= 1")
    params = {}
    if tau is None or rho is None:
        tau = tau or HEURISTIC_PRESET["tau_scale"] * LINEAR_TAU
        rho = rho or HEURISTIC_PRESET["rho_scale"] * LINEAR_RHO
        params["preset"] = HEURISTIC_PRESET["label"]
    return Schedule("heuristic", j, 1.0 / j, tau, rho, linear_grid(j), params=params)


def gap_adapted_grid(j: int, f_points, gaps) -> np.ndarray:
    """Grid whose local step density is proportional to ``1/g(f)**2``.

    The density is integrated with the trapezoid rule on the supplied points
    and the cumulative distribution is inverted piecewise linearly at
    ``h/(j+1)``, so a constant gap reproduces the linear grid.
    """
    fs = np.asarray(f_points, dtype=np.float64)
    gs = np.asarray(gaps, dtype=np.float64)
    order = np.argsort(fs)
    fs, gs = fs[order], gs[order]
    if fs.shape != gs.shape or fs.size < 2:
        raise ValueError("need matching f and gap arrays with at least 2 points")
    if not np.all(np.isfinite(gs)) or np.any(gs <= 0):
        raise ValueError("gap values must be positive and finite")
    if fs[0] > 0 or fs[-1] < 1:
        raise ValueError("gap profile must cover [0, 1]")
    density = gs ** -2.0
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(fs))])
    cdf /= cdf[-1]
    return np.interp(linear_grid(j), cdf, fs)


def gap_adapted(j: int, gap_profile, alpha: float = 0.5) -> Schedule:
    """Adiabatic schedule with steps concentrated where the gap is small.

    ``gap_profile`` is a :class:`~qsat.spectrum.SpectrumProfile` or an
    ``(f, g)`` pair of arrays.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    if hasattr(gap_profile, "gap"):
        fs, gs = gap_profile.f, gap_profile.gap
    else:
        fs, gs = gap_profile
    grid = gap_adapted_grid(j, fs, gs)
    return Schedule("gap_adapted", j, j ** (-alpha), LINEAR_TAU, LINEAR_RHO, grid,
                    grid="gap-adapted", params={"alpha": alpha})


@dataclass
class RunResult:
    p_soln: float
    cost: float
    j: int
    delta: float
    norm_drift: float
    trace: np.ndarray | None = None
    runtime_ms: float = 0.0
    schedule: dict = field(default_factory=dict)


def run_schedule(problem: Problem, weights: MixingWeights, schedule: Schedule,
                 trace: bool = False) -> RunResult:
    """Evolve the uniform state through ``schedule`` and report P_soln and C = j/P_soln."""
    if problem.solutions is None:
        raise StateError("run_schedule needs the instance's solution list")
    t0 = time.perf_counter()
    state = uniform_state(problem.n)
    cost_angles, mix_angles = schedule.angles()
    tr = evolve(state, problem, weights, cost_angles, mix_angles, trace=trace)
    p = solution_probability(state, problem)
    cost = schedule.j / p if p > 0 else math.inf
    return RunResult(
        p_soln=p, cost=cost, j=schedule.j, delta=schedule.delta,
        norm_drift=state.norm_drift(), trace=tr,
        runtime_ms=(time.perf_counter() - t0) * 1e3, schedule=schedule.describe(),
    )
