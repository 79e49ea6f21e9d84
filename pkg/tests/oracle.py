"""Independent dense reference implementations used as test oracles."""

import itertools

import numpy as np
import scipy.linalg as sla


def brute_cost(clauses, n, s):
    """Violated-clause count straight from the literal lists (1-based signed)."""
    bits = [(s >> i) & 1 for i in range(n)]
    bad = 0
    for lits in clauses:
        if not any((bits[abs(x) - 1] == 1) == (x > 0) for x in lits):
            bad += 1
    return bad


def brute_solutions(clauses, n):
    return [s for s in range(2**n) if brute_cost(clauses, n, s) == 0]


def dense_h0(w):
    """Mixing Hamiltonian from its matrix elements: omega/2 on the diagonal,
    -w_i/2 between assignments that differ exactly in bit i."""
    n = len(w)
    N = 2**n
    h = np.zeros((N, N))
    np.fill_diagonal(h, sum(w) / 2)
    for r, s in itertools.product(range(N), repeat=2):
        d = r ^ s
        if d and d & (d - 1) == 0:
            h[r, s] = -w[d.bit_length() - 1] / 2
    return h


def dense_walsh(n):
    N = 2**n
    return np.array([[(-1) ** bin(r & s).count("1") for s in range(N)] for r in range(N)]) / 2 ** (n / 2)


def dense_run(costs, w, cost_angles, mix_angles):
    """Uniform start, then exp(-i a_h Hc) followed by exp(-i b_h H0) per step."""
    h0 = dense_h0(w)
    N = h0.shape[0]
    psi = np.full(N, N**-0.5, dtype=complex)
    for a, b in zip(cost_angles, mix_angles):
        psi = np.exp(-1j * a * np.asarray(costs, dtype=float)) * psi
        psi = sla.expm(-1j * b * h0) @ psi
    return psi
