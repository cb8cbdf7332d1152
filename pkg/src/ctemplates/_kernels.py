"""Fixed-step RK4 kernels for the hot inner loops.

Every kernel integrates with *constant* numeric matrices over one or more
segments, which is exactly the situation for piecewise-constant inputs.
The functions are compiled with ``numba.njit`` unless the environment
variable ``CTEMPLATES_DISABLE_NUMBA`` is set to a truthy value (or numba is
missing), in which case the very same source runs as plain numpy.

Status codes returned by :func:`loop_segment`:

    0  ok
    1  gain matrix not positive-definite
    2  gain matrix condition estimate above ``GAIN_COND_MAX``
    3  non-finite state
"""
from __future__ import annotations

import math
import os

import numpy as np

GAIN_COND_MAX = 1e14

STATUS_OK = 0
STATUS_NOT_PD = 1
STATUS_ILL_CONDITIONED = 2
STATUS_NONFINITE = 3

_flag = os.environ.get("CTEMPLATES_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _flag not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by CTEMPLATES_DISABLE_NUMBA")
    from numba import njit

    USING_NUMBA = True
except ImportError:
    USING_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def deco(f):
            return f

        return deco


@njit(cache=True)
def chol_solve(S, v):
    """Solve ``S z = v`` for symmetric positive-definite ``S`` via Cholesky.

    Returns ``(z, status)``; on failure ``z`` is filled with NaN.
    """
    n = S.shape[0]
    L = np.zeros((n, n))
    z = np.empty(n)
    for j in range(n):
        d = S[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if not d > 0.0:
            z[:] = np.nan
            return z, STATUS_NOT_PD
        L[j, j] = math.sqrt(d)
        for i in range(j + 1, n):
            s = S[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    dmax = 0.0
    dmin = np.inf
    for j in range(n):
        dmax = max(dmax, L[j, j])
        dmin = min(dmin, L[j, j])
    if (dmax / dmin) ** 2 > GAIN_COND_MAX:
        z[:] = np.nan
        return z, STATUS_ILL_CONDITIONED
    w = np.empty(n)
    for i in range(n):
        s = v[i]
        for k in range(i):
            s -= L[i, k] * w[k]
        w[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = w[i]
        for k in range(i + 1, n):
            s -= L[k, i] * z[k]
        z[i] = s / L[i, i]
    return z, STATUS_OK


@njit(cache=True)
def gram_pass(As, Qs, lengths, nsteps, theta):
    """Co-integrate ``Psi' = A Psi`` and ``G' = exp(theta*tau) Psi' Q Psi`` from ``Psi=I, G=0``.

    ``As[k], Qs[k]`` are held constant over segment ``k`` of the given
    length, split into ``nsteps[k]`` RK4 steps; ``tau`` is measured from the
    start of the first segment.  With ``theta=0`` this yields the raw
    (unconjugated) Gramian integral.
    """
    n = As.shape[1]
    Psi = np.eye(n)
    G = np.zeros((n, n))
    t0 = 0.0
    for k in range(As.shape[0]):
        A = As[k]
        Q = Qs[k]
        m = nsteps[k]
        h = lengths[k] / m
        for i in range(m):
            tau = t0 + i * h
            w1 = math.exp(theta * tau)
            wm = math.exp(theta * (tau + 0.5 * h))
            w4 = math.exp(theta * (tau + h))
            k1 = A @ Psi
            P2 = Psi + 0.5 * h * k1
            k2 = A @ P2
            P3 = Psi + 0.5 * h * k2
            k3 = A @ P3
            P4 = Psi + h * k3
            k4 = A @ P4
            g = w1 * (Psi.T @ (Q @ Psi))
            g += 2.0 * wm * (P2.T @ (Q @ P2))
            g += 2.0 * wm * (P3.T @ (Q @ P3))
            g += w4 * (P4.T @ (Q @ P4))
            Psi = Psi + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            G = G + (h / 6.0) * g
        t0 += lengths[k]
    return Psi, 0.5 * (G + G.T)


@njit(cache=True)
def gram_pass_batch(As, Qs, lengths, nsteps, theta):
    """:func:`gram_pass` over a leading batch axis of ``As`` and ``Qs``."""
    B = As.shape[0]
    n = As.shape[2]
    Psis = np.empty((B, n, n))
    Gs = np.empty((B, n, n))
    for i in range(B):
        P, G = gram_pass(As[i], Qs[i], lengths, nsteps, theta)
        Psis[i] = P
        Gs[i] = G
    return Psis, Gs


@njit(cache=True)
def _error_rhs(A, Q, theta, e, S):
    z, status = chol_solve(S, Q @ e)
    de = A @ e - z
    dS = -(A.T @ S) - S @ A - theta * S + Q
    return de, dS, status


@njit(cache=True)
def loop_segment(A, b, C, theta, h, nsteps, x, e, S, X, E, SS):
    """RK4 for plant state ``x``, observer error ``e = xhat - x`` and gain ``S``.

    Plant: ``x' = A x + b``.  Observer error: ``e' = (A - S^{-1} C'C) e``.
    Gain: ``S' = -A'S - S A - theta S + C'C``.  ``A, b, C`` are held
    constant.  The state after step ``i`` is written into row ``i`` of
    ``X, E, SS``.  Returns ``(x, e, S, steps_done, status)``.
    """
    Q = C.T @ C
    for i in range(nsteps):
        k1x = A @ x + b
        k1e, k1S, s1 = _error_rhs(A, Q, theta, e, S)
        x2 = x + 0.5 * h * k1x
        e2 = e + 0.5 * h * k1e
        S2 = S + 0.5 * h * k1S
        k2x = A @ x2 + b
        k2e, k2S, s2 = _error_rhs(A, Q, theta, e2, S2)
        x3 = x + 0.5 * h * k2x
        e3 = e + 0.5 * h * k2e
        S3 = S + 0.5 * h * k2S
        k3x = A @ x3 + b
        k3e, k3S, s3 = _error_rhs(A, Q, theta, e3, S3)
        x4 = x + h * k3x
        e4 = e + h * k3e
        S4 = S + h * k3S
        k4x = A @ x4 + b
        k4e, k4S, s4 = _error_rhs(A, Q, theta, e4, S4)
        status = max(max(s1, s2), max(s3, s4))
        if status != STATUS_OK:
            return x, e, S, i, status
        xn = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        en = e + (h / 6.0) * (k1e + 2.0 * k2e + 2.0 * k3e + k4e)
        Sn = S + (h / 6.0) * (k1S + 2.0 * k2S + 2.0 * k3S + k4S)
        Sn = 0.5 * (Sn + Sn.T)
        if not (np.all(np.isfinite(xn)) and np.all(np.isfinite(en)) and np.all(np.isfinite(Sn))):
            return x, e, S, i, STATUS_NONFINITE
        x = xn
        e = en
        S = Sn
        X[i] = x
        E[i] = e
        SS[i] = S
    return x, e, S, nsteps, STATUS_OK
