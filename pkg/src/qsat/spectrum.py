"""Spectra of the interpolating Hamiltonian H(f) and of the step unitary U(f).

H(f) = (1 - f) H0 + f Hc, with H0 the weighted bit-flip mixer and Hc the
diagonal clause-violation count. Small systems are diagonalized densely;
larger ones use ARPACK on a matrix-free product.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from . import _fast
from .errors import CapabilityError, NumericalError, StateError
from .kernel import CostProblem, MixingWeights, Problem

DENSE_LIMIT = 14
DENSE_SOLVE_LIMIT = 9
UNITARY_LIMIT = 10
SOLUTION_OVERLAP = 0.5


def mixing_matrix(weights: MixingWeights) -> np.ndarray:
    """Dense H0 assembled entrywise: omega/2 on the diagonal, -w_i/2 between
    assignments that differ only in bit i."""
    n = weights.n
    N = 2**n
    h = np.zeros((N, N))
    idx = np.arange(N)
    h[idx, idx] = weights.omega / 2
    for i in range(n):
        h[idx, idx ^ (1 << i)] = -weights.w[i] / 2
    return h


def build_hamiltonian(problem: Problem, weights: MixingWeights, f: float,
                      dense: bool = True, limit: int = DENSE_LIMIT):
    """H(f) as a dense array, or as a matrix-free ``LinearOperator`` when ``dense=False``."""
    if not dense:
        return hamiltonian_operator(problem, weights, f)
    if problem.n > limit:
        raise CapabilityError(f"dense H(f) limited to n <= {limit}, got {problem.n}")
    h = (1.0 - f) * mixing_matrix(weights)
    h[np.diag_indices_from(h)] += f * problem.cost_table()
    return h


def hamiltonian_operator(problem: Problem, weights: MixingWeights, f: float) -> LinearOperator:
    N = 2**problem.n
    costs = np.ascontiguousarray(problem.cost_table(), dtype=np.float64)
    w = np.ascontiguousarray(weights.w)
    omega = float(weights.omega)
    f = float(f)

    def matvec(x):
        x = np.ascontiguousarray(np.ravel(x), dtype=np.float64)
        out = np.empty_like(x)
        _fast.ham_matvec(x, out, costs, w, omega, f)
        return out

    def matmat(X):
        X = np.asfortranarray(X, dtype=np.float64)
        out = np.empty_like(X, order="F")
        _fast.ham_matmat(X, out, costs, w, omega, f)
        return out

    return LinearOperator((N, N), matvec=matvec, matmat=matmat, rmatvec=matvec, dtype=np.float64)


def expected_cost(eigvec: np.ndarray, problem: Problem) -> float:
    """Probability-weighted number of violated clauses, ``sum_s c(s) |phi_s|^2``."""
    p = np.abs(np.asarray(eigvec)) ** 2
    return float(p @ problem.cost_table())


@dataclass
class SpectrumProfile:
    """Low-lying spectrum of H(f) sampled on a grid of f values (sorted)."""

    f: np.ndarray
    eigenvalues: np.ndarray        # (points, L), NaN-padded
    overlaps: np.ndarray           # solution-subspace probability per level
    gap: np.ndarray
    expected_cost_ground: np.ndarray
    min_gap: float
    f_star: float
    refinement: int
    classify: str = "overlap"
    eigenvectors: list | None = None

    @property
    def levels(self) -> int:
        return self.eigenvalues.shape[1]

    @property
    def max_cost_drop(self) -> float:
        """Largest jump of the ground-state expected cost between neighbouring points."""
        if self.f.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.expected_cost_ground))))

    def to_csv(self, path: str | Path) -> None:
        L = self.levels
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["f", *[f"eigenvalue_{a + 1}" for a in range(L)],
                         *[f"overlap_{a + 1}" for a in range(L)], "gap", "expected_cost_ground"])
            for i in range(self.f.size):
                wr.writerow([_fmt(self.f[i]), *map(_fmt, self.eigenvalues[i]),
                             *map(_fmt, self.overlaps[i]), _fmt(self.gap[i]),
                             _fmt(self.expected_cost_ground[i])])


def _fmt(x) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


@dataclass
class _Point:
    f: float
    values: np.ndarray
    vectors: np.ndarray
    overlaps: np.ndarray
    gap: float
    ground_cost: float


class _Solver:
    """Lowest eigenpairs of H(f), with warm starts across consecutive f."""

    def __init__(self, problem, weights, dense: bool, tol: float):
        self.problem = problem
        self.weights = weights
        self.dense = dense
        self.tol = tol
        self.sol = np.asarray(problem.solutions, dtype=np.int64)
        self.S = self.sol.size
        self._h0 = mixing_matrix(weights) if dense else None
        self._costs = np.asarray(problem.cost_table(), dtype=np.float64)
        self._v0: np.ndarray | None = None

    def eig(self, f: float, k: int) -> tuple[np.ndarray, np.ndarray]:
        N = 2**self.problem.n
        k = min(k, N if self.dense else N - 1)
        if self.dense:
            h = (1.0 - f) * self._h0
            h[np.diag_indices_from(h)] += f * self._costs
            return sla.eigh(h, subset_by_index=(0, k - 1))
        op = hamiltonian_operator(self.problem, self.weights, f)
        try:
            vals, vecs = eigsh(op, k=k, which="SA", tol=self.tol, v0=self._v0,
                               maxiter=max(5000, 20 * N))
        except ArpackNoConvergence as e:
            raise NumericalError("eigsh did not converge", f=f, iterations=max(5000, 20 * N)) from e
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        self._v0 = vecs[:, 0].copy()
        return vals, vecs

    def endpoint(self, f: float, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Exact eigenpairs at f = 0 (Walsh basis) or f = 1 (assignment basis)."""
        N = 2**self.problem.n
        k = min(k, N)
        if f == 1.0:
            order = np.argsort(self._costs, kind="stable")[:k]
            vecs = np.zeros((N, k))
            vecs[order, np.arange(k)] = 1.0
            return self._costs[order], vecs
        d = self.weights.diagonal()
        order = np.argsort(d, kind="stable")[:k]
        # column r of the normalized Walsh-Hadamard matrix
        pop = np.bitwise_count(np.arange(N)[:, None] & order[None, :])
        return d[order], (1.0 - 2.0 * (pop & 1)) * 2.0 ** (-self.problem.n / 2)

    def point(self, f: float, L: int, classify: str) -> _Point:
        # the count rule must see past all S solution-bound levels
        k = max(L, self.S + 1) if classify == "count" else L
        N = 2**self.problem.n
        while True:
            if f in (0.0, 1.0) and not self.dense:
                vals, vecs = self.endpoint(f, k)
            else:
                vals, vecs = self.eig(f, k)
            ov = np.sum(vecs[self.sol, :] ** 2, axis=0) if self.S else np.zeros(vals.size)
            gap = _gap_from_levels(vals, ov, self.S, classify)
            full = k >= (N if self.dense or f in (0.0, 1.0) else N - 1)
            if not math.isnan(gap) or full:
                break
            k = min(2 * k, N)
        ground_cost = float(vecs[:, 0] ** 2 @ self._costs)
        return _Point(f, vals, vecs, ov, gap, ground_cost)


def _gap_from_levels(vals, overlaps, S: int, classify: str) -> float:
    if classify == "count":
        return float(vals[S] - vals[0]) if vals.size > S else math.nan
    for a in range(1, vals.size):
        if overlaps[a] <= SOLUTION_OVERLAP:
            return float(vals[a] - vals[0])
    return math.nan


def gap_profile(problem: Problem, weights: MixingWeights, f_grid=None, L: int = 6,
                classify: str = "overlap", refine: int = 3, refine_mode: str = "scan",
                dense: bool | None = None,
                tol: float = 1e-10, keep_vectors: bool = False) -> SpectrumProfile:
    """Energy gap g(f) on a grid, with local refinement around its minimum.

    ``classify="overlap"`` treats a level as solution-bound when more than half
    its probability lies on solutions and measures the gap to the lowest other
    level above the ground state. ``classify="count"`` uses level ``S`` (the
    first level that does not end on one of the S solutions when no levels
    cross), i.e. ``g = E_S - E_0``.

    Each refinement round works on a lattice 10x finer than the previous one,
    centred on the current minimum. ``refine_mode="scan"`` evaluates all 21
    lattice points of the round; ``"descent"`` walks downhill from the
    minimum and stops at the first lattice-local minimum (same answer for a
    unimodal dip, a fraction of the eigen-solves).
    """
    if problem.solutions is None:
        raise StateError("gap_profile needs the solution list")
    if classify not in ("overlap", "count"):
        raise ValueError(f"unknown classification {classify!r}")
    if refine_mode not in ("scan", "descent"):
        raise ValueError(f"unknown refine mode {refine_mode!r}")
    if f_grid is None:
        f_grid = np.linspace(0.0, 1.0, 101)
    f_grid = np.asarray(f_grid, dtype=np.float64)
    if dense is None:
        dense = problem.n <= DENSE_SOLVE_LIMIT
    solver = _Solver(problem, weights, dense, tol)

    points: dict[float, _Point] = {}

    def evaluate(fs):
        for f in fs:
            f = float(f)
            if f not in points:
                points[f] = solver.point(f, L, classify)

    evaluate(np.sort(f_grid))
    spacing = float(np.min(np.diff(np.sort(f_grid)))) if f_grid.size > 1 else 0.0
    lo_f, hi_f = float(f_grid.min()), float(f_grid.max())
    depth = 0
    for _ in range(refine):
        if spacing == 0.0:
            break
        best = _argmin_gap(points)
        step = spacing / 10
        if refine_mode == "scan":
            fine = best + step * np.arange(-10, 11)
            evaluate(np.round(fine[(fine >= lo_f) & (fine <= hi_f)], 12))
        else:
            _descend(points, evaluate, best, step, lo_f, hi_f)
        spacing = step
        depth += 1

    fs = np.array(sorted(points))
    width = max(p.values.size for p in points.values())
    width = max(width, L)
    ev = np.full((fs.size, width), np.nan)
    ov = np.full((fs.size, width), np.nan)
    for i, f in enumerate(fs):
        p = points[f]
        ev[i, :p.values.size] = p.values
        ov[i, :p.overlaps.size] = p.overlaps
    gaps = np.array([points[f].gap for f in fs])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        i_min = int(np.nanargmin(gaps)) if np.any(~np.isnan(gaps)) else 0
    return SpectrumProfile(
        f=fs, eigenvalues=ev, overlaps=ov, gap=gaps,
        expected_cost_ground=np.array([points[f].ground_cost for f in fs]),
        min_gap=float(gaps[i_min]), f_star=float(fs[i_min]), refinement=depth,
        classify=classify,
        eigenvectors=[points[f].vectors for f in fs] if keep_vectors else None,
    )


def _descend(points, evaluate, best: float, step: float, lo: float, hi: float):
    def g(f):
        return points[f].gap if not math.isnan(points[f].gap) else math.inf

    cur = best
    for direction in (1, -1):
        moved = False
        for i in range(1, 11):
            f = round(cur + direction * step, 12)
            if not lo <= f <= hi:
                break
            evaluate([f])
            if g(f) < g(cur):
                cur, moved = f, True
            else:
                break
        if moved:
            break


def _argmin_gap(points: dict[float, _Point]) -> float:
    best_f, best_g = None, math.inf
    for f, p in points.items():
        if not math.isnan(p.gap) and p.gap < best_g:
            best_f, best_g = f, p.gap
    if best_f is None:
        raise NumericalError("no level above the ground state classified as non-solution")
    return best_f


def min_gap(problem: Problem, weights: MixingWeights, **kwargs) -> float:
    return gap_profile(problem, weights, **kwargs).min_gap


# --- step unitary -----------------------------------------------------------


def appendix_pair() -> tuple[np.ndarray, np.ndarray]:
    """The one-variable example: H0 = [[1,-1],[-1,1]]/2 and Hc = diag(0, 2)."""
    return 0.5 * np.array([[1.0, -1.0], [-1.0, 1.0]]), np.array([0.0, 2.0])


def appendix_problem() -> CostProblem:
    return CostProblem(n=1, costs=np.array([0, 2]), solutions=[0])


def step_unitary(h0: np.ndarray, hc: np.ndarray, f: float, delta: float) -> np.ndarray:
    """``U(f) = exp(-i H0 (1-f) delta) exp(-i Hc f delta)`` for dense H0, diagonal Hc."""
    vals, vecs = np.linalg.eigh(h0)
    mix = (vecs * np.exp(-1j * vals * (1 - f) * delta)) @ vecs.conj().T
    return mix * np.exp(-1j * np.asarray(hc) * f * delta)[None, :]


def _wrap(theta: np.ndarray) -> np.ndarray:
    # map into (-pi, pi]
    t = np.mod(theta + np.pi, 2 * np.pi) - np.pi
    t[np.isclose(t, -np.pi, atol=1e-14, rtol=0)] = np.pi
    return t


def step_eigenphases(h0: np.ndarray, hc: np.ndarray, f: float, delta: float,
                     limit: int = UNITARY_LIMIT) -> tuple[np.ndarray, np.ndarray]:
    """Eigenphases ``theta`` in (-pi, pi] and orthonormal eigenvectors of U(f).

    Eigenvalues are ``exp(-i theta)``. The complex Schur form of a unitary is
    diagonal, so its Schur vectors are an orthonormal eigenbasis even when
    eigenvalues are degenerate.
    """
    N = h0.shape[0]
    if N > 2**limit:
        raise CapabilityError(f"dense unitary limited to n <= {limit}")
    u = step_unitary(h0, hc, f, delta)
    t, z = sla.schur(u, output="complex")
    theta = _wrap(-np.angle(np.diag(t)))
    order = np.argsort(theta)
    return theta[order], z[:, order]


@dataclass
class EigenphaseTrace:
    f: np.ndarray                  # f at each record; first is 0, last is 1
    theta: np.ndarray              # (records, N) eigenphases by tracked label
    leakage: np.ndarray            # (records, N) |<e_r|psi>|^2 by tracked label
    p_soln: np.ndarray             # after each record's state
    start_label: int
    final_label: int
    degenerate_steps: list[int] = field(default_factory=list)
    vectors: list | None = None

    @property
    def wrapped(self) -> bool:
        """True when a tracked eigenphase jumps across the branch cut at +-pi."""
        return bool(np.any(np.abs(np.diff(self.theta, axis=0)) > np.pi))

    def final_overlap(self, label: int | None = None) -> float:
        return float(self.leakage[-1, self.final_label if label is None else label])


def wrap_bound(h0: np.ndarray, hc: np.ndarray, delta: float) -> float:
    """Upper bound on the eigenphase spread of U(f) over f in [0, 1].

    For positive semidefinite A, B the product exp(-iA) exp(-iB) has
    eigenphases in [0, ||A|| + ||B||]; that sum is linear in f, so its
    maximum sits at an endpoint. Below pi no eigenphase can reach the cut.
    """
    return delta * max(float(np.linalg.eigvalsh(h0).max()), float(np.max(hc)))


def _as_matrices(system):
    if len(system) == 3:
        h0, hc, sols = system
        return np.asarray(h0), np.asarray(hc, dtype=np.float64), list(sols)
    problem, weights = system
    if problem.solutions is None:
        raise StateError("trace needs the solution list")
    if problem.n > UNITARY_LIMIT:
        raise CapabilityError(f"dense unitary limited to n <= {UNITARY_LIMIT}")
    return (mixing_matrix(weights), np.asarray(problem.cost_table(), dtype=np.float64),
            list(problem.solutions))


def adiabatic_trace(system, schedule, keep_vectors: bool = False) -> EigenphaseTrace:
    """Step the state through ``schedule`` while tracking the eigenvectors of U(f).

    ``system`` is ``(h0, hc_diagonal, solutions)`` or ``(problem, weights)``.
    The schedule's phase functions must be the linear ones (U(f) is defined
    with tau = 1 - f, rho = f). Records are taken at f = 0, after every step,
    and at f = 1; labels follow maximal-overlap matching between neighbours.
    """
    h0, hc, sols = _as_matrices(system)
    N = h0.shape[0]
    n = int(round(math.log2(N)))
    delta = schedule.delta
    psi = np.full(N, 2.0 ** (-n / 2), dtype=np.complex128)
    fs = np.concatenate([[0.0], schedule.f, [1.0]])

    thetas = np.zeros((fs.size, N))
    leak = np.zeros((fs.size, N))
    psol = np.zeros(fs.size)
    degenerate: list[int] = []
    kept = [] if keep_vectors else None

    prev_vecs = None
    perm_vecs = None
    for idx, f in enumerate(fs):
        theta, vecs = step_eigenphases(h0, hc, f, delta)
        if prev_vecs is None:
            perm = np.arange(N)
        else:
            ov = np.abs(prev_vecs.conj().T @ vecs) ** 2
            rows, cols = linear_sum_assignment(-ov)
            perm = cols[np.argsort(rows)]
            if np.any(ov[np.arange(N), perm] < 0.5):
                degenerate.append(idx)
        theta, vecs = theta[perm], vecs[:, perm]
        perm_vecs = vecs
        if 0 < idx < fs.size - 1:
            # the step taken at this f
            psi = step_unitary(h0, hc, f, delta) @ psi
        thetas[idx] = theta
        leak[idx] = np.abs(vecs.conj().T @ psi) ** 2
        psol[idx] = float(np.sum(np.abs(psi[sols]) ** 2))
        if kept is not None:
            kept.append(vecs)
        prev_vecs = perm_vecs
    return EigenphaseTrace(
        f=fs, theta=thetas, leakage=leak, p_soln=psol,
        start_label=int(np.argmax(leak[0])), final_label=int(np.argmax(leak[-1])),
        degenerate_steps=degenerate, vectors=kept,
    )


def hamiltonian_phases(h0: np.ndarray, hc: np.ndarray, f: float, delta: float) -> np.ndarray:
    """Eigenvalues of H(f) * delta, for comparison with the step eigenphases."""
    h = (1 - f) * h0 + f * np.diag(hc)
    return np.linalg.eigvalsh(h) * delta
