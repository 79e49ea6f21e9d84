"""Compiled inner loops. Everything here works in place on contiguous 1-D arrays."""

import numba
import numpy as np


@numba.njit(cache=True)
def fwht(a):
    """Unnormalized Walsh-Hadamard butterfly; ``a.size`` must be a power of two."""
    N = a.shape[0]
    h = 1
    # two butterfly levels per sweep halves the memory traffic
    while 4 * h <= N:
        for i in range(0, N, 4 * h):
            for k in range(i, i + h):
                x0 = a[k]
                x1 = a[k + h]
                x2 = a[k + 2 * h]
                x3 = a[k + 3 * h]
                s01 = x0 + x1
                d01 = x0 - x1
                s23 = x2 + x3
                d23 = x2 - x3
                a[k] = s01 + s23
                a[k + h] = d01 + d23
                a[k + 2 * h] = s01 - s23
                a[k + 3 * h] = d01 - d23
        h *= 4
    if h < N:
        for i in range(0, N, 2 * h):
            for k in range(i, i + h):
                x = a[k]
                y = a[k + h]
                a[k] = x + y
                a[k + h] = x - y


@numba.njit(cache=True)
def scale(a, factor):
    for k in range(a.shape[0]):
        a[k] *= factor


@numba.njit(cache=True)
def lookup_phase(a, levels, table):
    """``a[s] *= table[levels[s]]``."""
    for s in range(a.shape[0]):
        a[s] *= table[levels[s]]


@numba.njit(cache=True)
def phase_table(values, theta, factor):
    out = np.empty(values.shape[0], dtype=np.complex128)
    for i in range(values.shape[0]):
        out[i] = factor * np.exp(-1j * theta * values[i])
    return out


@numba.njit(cache=True)
def evolve(amps, cost_levels, cost_values, mix_levels, mix_values, cost_angles, mix_angles,
           solutions, trace):
    """Apply ``len(cost_angles)`` discrete steps in place.

    Step h multiplies by exp(-i cost_angles[h] C) then by
    W exp(-i mix_angles[h] D) W. ``trace[h]`` receives the solution
    probability after step h when ``trace`` is nonempty.
    """
    N = amps.shape[0]
    inv_n = 1.0 / N
    record = trace.shape[0] > 0
    for h in range(cost_angles.shape[0]):
        ct = phase_table(cost_values, cost_angles[h], 1.0)
        lookup_phase(amps, cost_levels, ct)
        fwht(amps)
        # both 2^{-n/2} normalizations folded into the diagonal
        mt = phase_table(mix_values, mix_angles[h], inv_n)
        lookup_phase(amps, mix_levels, mt)
        fwht(amps)
        if record:
            p = 0.0
            for s in solutions:
                z = amps[s]
                p += z.real * z.real + z.imag * z.imag
            trace[h] = p


@numba.njit(cache=True)
def ham_matvec(x, out, costs, weights, omega, f):
    """``out = H(f) x`` with the mixing term applied one bit at a time."""
    N = x.shape[0]
    n = weights.shape[0]
    a = 0.5 * (1.0 - f)
    for s in range(N):
        out[s] = (a * omega + f * costs[s]) * x[s]
    for i in range(n):
        h = 1 << i
        c = a * weights[i]
        for b in range(0, N, 2 * h):
            for k in range(b, b + h):
                out[k] -= c * x[k + h]
                out[k + h] -= c * x[k]


@numba.njit(cache=True)
def ham_matmat(X, out, costs, weights, omega, f):
    for c in range(X.shape[1]):
        ham_matvec(X[:, c], out[:, c], costs, weights, omega, f)
