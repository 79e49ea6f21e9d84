"""State vectors and the discrete adiabatic step.

One step maps psi to ``exp(-i tau H0 delta) exp(-i rho Hc delta) psi`` where
``Hc`` is diagonal in the assignment basis and ``H0 = W D W`` is diagonal in
the Walsh-Hadamard basis. Both diagonals take few distinct values, so phases
are applied through small lookup tables indexed by a per-state level array.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from . import _fast
from .errors import CapabilityError, DegenerateWeightError, StateError

MAX_QUBITS = 26

WEIGHT_MODES = ("unweighted", "clause-count", "normalized")


class Problem(Protocol):
    """Anything with a diagonal cost over ``2**n`` assignments."""

    n: int
    solutions: list[int] | None

    def cost_table(self) -> np.ndarray: ...


@dataclass
class CostProblem:
    """A bare diagonal cost, for toy systems that are not SAT instances."""

    n: int
    costs: np.ndarray
    solutions: list[int] | None = None

    def __post_init__(self):
        self.costs = np.asarray(self.costs)
        if self.costs.shape != (2**self.n,):
            raise ValueError(f"need {2**self.n} costs, got shape {self.costs.shape}")
        if self.solutions is None:
            self.solutions = np.flatnonzero(self.costs == self.costs.min()).tolist()

    def cost_table(self) -> np.ndarray:
        return self.costs

    @property
    def id(self) -> str:
        return f"cost-n{self.n}"


@dataclass
class QuantumState:
    n: int
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.ascontiguousarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (2**self.n,):
            raise ValueError(f"need {2**self.n} amplitudes, got shape {self.amps.shape}")

    def norm2(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def norm_drift(self) -> float:
        return abs(self.norm2() - 1.0)

    def copy(self) -> "QuantumState":
        return QuantumState(self.n, self.amps.copy())

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2


def _check_n(n: int, limit: int | None):
    limit = MAX_QUBITS if limit is None else limit
    if not 1 <= n <= limit:
        raise CapabilityError(f"n={n} outside supported range 1..{limit}")


def uniform_state(n: int, limit: int | None = None) -> QuantumState:
    _check_n(n, limit)
    return QuantumState(n, np.full(2**n, 2.0 ** (-n / 2), dtype=np.complex128))


def basis_state(n: int, s: int, limit: int | None = None) -> QuantumState:
    _check_n(n, limit)
    amps = np.zeros(2**n, dtype=np.complex128)
    amps[s] = 1.0
    return QuantumState(n, amps)


@dataclass
class MixingWeights:
    """Per-variable weights of the mixing Hamiltonian.

    ``w == unit * iw`` when the weights are commensurate (every built-in mode),
    which lets the Walsh-basis diagonal be stored as small integer levels.
    """

    w: np.ndarray
    omega: float
    mode: str = "custom"
    unit: float | None = None
    _levels: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if np.any(self.w <= 0):
            raise DegenerateWeightError("all mixing weights must be positive")

    @classmethod
    def from_weights(cls, w: Sequence[float], mode: str = "custom", unit: float | None = None):
        w = np.asarray(w, dtype=np.float64)
        return cls(w=w, omega=float(w.sum()), mode=mode, unit=unit)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def diagonal(self) -> np.ndarray:
        """``D[r] = sum_i w_i r_i`` as floats."""
        levels, values = self.levels()
        return values[levels]

    def levels(self) -> tuple[np.ndarray, np.ndarray]:
        if self._levels is None:
            self._levels = _weight_levels(self.w, self.unit)
        return self._levels


def _weight_levels(w: np.ndarray, unit: float | None):
    n = w.shape[0]
    if unit is not None:
        iw = np.rint(w / unit).astype(np.int64)
        total = int(iw.sum())
        dtype = np.uint8 if total < 256 else np.uint16 if total < 65536 else np.uint32
        lev = np.zeros(2**n, dtype=dtype)
        cube = lev.reshape((2,) * n)
        for i in range(n):
            idx = [slice(None)] * n
            idx[n - 1 - i] = 1
            cube[tuple(idx)] += dtype(iw[i])
        return lev, np.arange(total + 1, dtype=np.float64) * unit
    d = np.zeros(2**n, dtype=np.float64)
    cube = d.reshape((2,) * n)
    for i in range(n):
        idx = [slice(None)] * n
        idx[n - 1 - i] = 1
        cube[tuple(idx)] += w[i]
    values, inverse = np.unique(d, return_inverse=True)
    return inverse.astype(np.uint32), values


def make_weights(instance, mode: str = "unweighted") -> MixingWeights:
    """Mixing weights for ``instance``.

    ``clause-count`` sets ``w_i`` to the number of clause occurrences of
    variable ``i`` (so ``omega = m k``); ``normalized`` rescales those to mean 1.
    """
    n = instance.n
    if mode == "unweighted":
        return MixingWeights(np.ones(n), float(n), mode, unit=1.0)
    if mode not in WEIGHT_MODES:
        raise ValueError(f"unknown weight mode {mode!r}; expected one of {WEIGHT_MODES}")
    counts = np.zeros(n, dtype=np.int64)
    for c in instance.clauses:
        for v in c.vars:
            counts[v] += 1
    if np.any(counts == 0):
        unused = np.flatnonzero(counts == 0).tolist()
        raise DegenerateWeightError(f"variables {unused} appear in no clause")
    if mode == "clause-count":
        return MixingWeights(counts.astype(np.float64), float(counts.sum()), mode, unit=1.0)
    unit = n / counts.sum()
    w = counts * unit
    return MixingWeights(w, float(w.sum()), mode, unit=unit)


def _cost_levels(problem: Problem) -> tuple[np.ndarray, np.ndarray]:
    table = problem.cost_table()
    if np.issubdtype(table.dtype, np.integer) or np.all(table == np.rint(table)):
        levels = table if np.issubdtype(table.dtype, np.integer) else table.astype(np.int64)
        top = int(levels.max()) if levels.size else 0
        return np.ascontiguousarray(levels), np.arange(top + 1, dtype=np.float64)
    values, inverse = np.unique(table, return_inverse=True)
    return inverse.astype(np.uint32), values.astype(np.float64)


def walsh_hadamard(state: QuantumState) -> QuantumState:
    """Apply the normalized Walsh-Hadamard transform in place."""
    _fast.fwht(state.amps)
    _fast.scale(state.amps, 2.0 ** (-state.n / 2))
    return state


def apply_cost_phase(state: QuantumState, problem: Problem, theta: float) -> QuantumState:
    """``amps[s] *= exp(-i theta c(s))`` in place."""
    levels, values = _cost_levels(problem)
    _fast.lookup_phase(state.amps, levels, _fast.phase_table(values, float(theta), 1.0))
    return state


def apply_mixing_phase(state: QuantumState, weights: MixingWeights, theta: float) -> QuantumState:
    """``exp(-i theta H0)`` applied as W, diagonal phase, W (in place)."""
    if weights.n != state.n:
        raise ValueError(f"weights for n={weights.n} applied to state with n={state.n}")
    levels, values = weights.levels()
    _fast.fwht(state.amps)
    table = _fast.phase_table(values, float(theta), 2.0 ** (-state.n))
    _fast.lookup_phase(state.amps, levels, table)
    _fast.fwht(state.amps)
    return state


def step(state: QuantumState, problem: Problem, weights: MixingWeights,
         tau: float, rho: float, delta: float) -> QuantumState:
    """One discrete step: cost phase ``rho*delta`` first, then mixing phase ``tau*delta``."""
    apply_cost_phase(state, problem, rho * delta)
    return apply_mixing_phase(state, weights, tau * delta)


def evolve(state: QuantumState, problem: Problem, weights: MixingWeights,
           cost_angles: np.ndarray, mix_angles: np.ndarray,
           trace: bool = False) -> np.ndarray | None:
    """Apply ``len(cost_angles)`` steps in place; optionally return P_soln after each."""
    cost_angles = np.ascontiguousarray(cost_angles, dtype=np.float64)
    mix_angles = np.ascontiguousarray(mix_angles, dtype=np.float64)
    if cost_angles.shape != mix_angles.shape:
        raise ValueError("angle arrays differ in length")
    if weights.n != state.n:
        raise ValueError(f"weights for n={weights.n} applied to state with n={state.n}")
    clev, cval = _cost_levels(problem)
    mlev, mval = weights.levels()
    if trace:
        if problem.solutions is None:
            raise StateError("solution trace needs the solution list")
        sols = np.asarray(problem.solutions, dtype=np.int64)
        out = np.zeros(cost_angles.shape[0])
    else:
        sols = np.zeros(0, dtype=np.int64)
        out = np.zeros(0)
    _fast.evolve(state.amps, clev, cval, mlev, mval, cost_angles, mix_angles, sols, out)
    return out if trace else None


def solution_probability(state: QuantumState, problem: Problem) -> float:
    if problem.solutions is None:
        raise StateError("solution probability needs the solution list")
    if not len(problem.solutions):
        return 0.0
    a = state.amps[np.asarray(problem.solutions, dtype=np.int64)]
    return float(np.sum(a.real**2 + a.imag**2))


# --- debug dumps: b"QSAT" | u32 n | u64 step | complex128 LE amplitudes ---

_MAGIC = b"QSAT"
_HEADER = struct.Struct("<4sIQ")


def dump_state(state: QuantumState, path: str | Path, step_index: int = 0) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, state.n, step_index))
        fh.write(state.amps.astype("<c16").tobytes())


def load_state(path: str | Path) -> tuple[QuantumState, int]:
    data = Path(path).read_bytes()
    magic, n, step_index = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a state dump")
    amps = np.frombuffer(data, dtype="<c16", offset=_HEADER.size)
    if amps.shape != (2**n,):
        raise ValueError(f"{path}: truncated dump")
    return QuantumState(n, amps.astype(np.complex128)), step_index
