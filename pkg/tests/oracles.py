"""Independent reference computations used by the tests.

Nothing here calls the library's integrators or determinant code.
"""
import itertools
import math

import numpy as np


def expm_series(M, terms=30):
    """Matrix exponential by scaling and squaring around a truncated Taylor series."""
    M = np.asarray(M, dtype=float)
    norm = np.linalg.norm(M, 1)
    s = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    X = M / 2 ** s
    E = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for k in range(1, terms):
        term = term @ X / k
        E = E + term
    for _ in range(s):
        E = E @ E
    return E


def leibniz_det(M):
    """Permutation-sum determinant for small numeric matrices."""
    n = M.shape[0]
    total = 0.0
    for perm in itertools.permutations(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n) if perm[i] > perm[j])
        prod = 1.0
        for i in range(n):
            prod *= M[i, perm[i]]
        total += (-1) ** inv * prod
    return total


def piecewise_flow_expm(A_fn, signal, a, b):
    """Transition matrix over [a, b] as a product of exact segment exponentials."""
    n = A_fn(signal.levels[0]).shape[0]
    Phi = np.eye(n)
    for k in range(signal.num_segments):
        lo = max(a, signal.breakpoints[k])
        hi = min(b, signal.breakpoints[k + 1])
        if hi > lo:
            Phi = expm_series(A_fn(signal.levels[k]) * (hi - lo)) @ Phi
    return Phi


def gramian_quadrature(A_fn, C_fn, signal, s, t, nodes_per_segment=400):
    """Gamma(t, s) by composite Simpson quadrature of Phi(tau,t)' C'C Phi(tau,t),
    with Phi from segment exponentials."""
    n = A_fn(signal.levels[0]).shape[0]
    Phi_ts = piecewise_flow_expm(A_fn, signal, s, t)  # Phi(t, s)
    total = np.zeros((n, n))
    for k in range(signal.num_segments):
        lo = max(s, signal.breakpoints[k])
        hi = min(t, signal.breakpoints[k + 1])
        if hi <= lo:
            continue
        u = signal.levels[k]
        A, C = A_fn(u), C_fn(u)
        Q = C.T @ C
        Phi_lo_s = piecewise_flow_expm(A_fn, signal, s, lo)  # Phi(lo, s)
        m = nodes_per_segment
        taus = np.linspace(lo, hi, 2 * m + 1)
        w = np.ones(2 * m + 1)
        w[1:-1:2] = 4
        w[2:-1:2] = 2
        w *= (hi - lo) / (6 * m)
        Phi_t_inv = np.linalg.inv(Phi_ts)
        for tau, wk in zip(taus, w):
            # Phi(tau, t) = Phi(tau, s) Phi(t, s)^{-1}
            P = expm_series(A * (tau - lo)) @ Phi_lo_s @ Phi_t_inv
            total += wk * P.T @ Q @ P
    return 0.5 * (total + total.T)


def rk4_integrate(f, y0, t0, t1, steps):
    y = np.array(y0, dtype=float)
    h = (t1 - t0) / steps
    t = t0
    for _ in range(steps):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def brute_force_rank(points, d):
    """Rank of the monomial evaluation matrix, monomials enumerated independently."""
    pts = np.atleast_2d(points)
    p = pts.shape[1]
    monos = [e for e in itertools.product(range(d + 1), repeat=p) if sum(e) <= d]
    V = np.array([[np.prod(pt ** np.array(e)) for pt in pts] for e in monos])
    return np.linalg.matrix_rank(V, tol=1e-9 * np.linalg.norm(V, 2)), len(monos)
