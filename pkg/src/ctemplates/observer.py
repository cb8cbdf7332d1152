"""Kalman-like observer with a linear (Lyapunov-type) gain equation.

    xhat' = A(u) xhat + b(u) - S^{-1} C(u)' (C(u) xhat - y)
    S'    = -A(u)' S - S A(u) - theta S + C(u)' C(u)
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import GainSingularityError, ThetaTooSmallError, ValidationError
from .sysmodel import (DEFAULT_SUBSTEPS, InputSignal, StateAffineSystem, _conjugate_inverse,
                       _segment_arrays, gramian)

SYM_TOL = 1e-10


@dataclass(frozen=True)
class ObserverState:
    xhat: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        if S.shape[0] != S.shape[1] or S.shape[0] != np.size(self.xhat):
            raise ValidationError(f"S must be {np.size(self.xhat)}x{np.size(self.xhat)}", field="S")
        if np.max(np.abs(S - S.T), initial=0.0) > SYM_TOL:
            raise ValidationError("S is not symmetric", field="S")
        object.__setattr__(self, "xhat", np.asarray(self.xhat, dtype=float).ravel())
        object.__setattr__(self, "S", S)


def observer_rhs(sys: StateAffineSystem, u, state: ObserverState, y, theta: float):
    """Right-hand side ``(dxhat, dS)`` of the observer at a frozen input value."""
    A, b, C = sys.A_at(u), sys.b_at(u), sys.C_at(u)
    innov = C.T @ (C @ state.xhat - np.asarray(y, dtype=float).ravel())
    z, status = _kernels.chol_solve(np.ascontiguousarray(state.S), np.ascontiguousarray(innov))
    if status != _kernels.STATUS_OK:
        raise GainSingularityError("gain matrix S is singular or not positive-definite")
    dxhat = A @ state.xhat + b - z
    dS = -A.T @ state.S - state.S @ A - theta * state.S + C.T @ C
    return dxhat, 0.5 * (dS + dS.T)


def steady_state_gain(sys: StateAffineSystem, theta: float) -> np.ndarray:
    """Solve ``A(0)' S + S A(0) + theta S = C(0)' C(0)`` by vectorisation.

    A positive-definite solution needs every eigenvalue of ``A(0) + theta/2``
    in the open right half-plane.
    """
    if theta <= 0:
        raise ThetaTooSmallError(f"theta must be positive, got {theta}")
    n = sys.n
    u0 = np.zeros(sys.p)
    A, C = sys.A_at(u0), sys.C_at(u0)
    abscissa = float(np.max(np.real(np.linalg.eigvals(-A))))
    if theta <= 2.0 * abscissa:
        raise ThetaTooSmallError(
            f"theta={theta} must exceed twice the spectral abscissa of -A(0) ({2 * abscissa:.6g})"
        )
    I = np.eye(n)
    # column-major vec: vec(A'S) = (I kron A') vec S, vec(S A) = (A' kron I) vec S
    L = np.kron(I, A.T) + np.kron(A.T, I) + theta * np.eye(n * n)
    rhs = (C.T @ C).reshape(-1, order="F")
    try:
        vecS = scipy.linalg.solve(L, rhs)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ThetaTooSmallError(f"vectorised gain equation is singular for theta={theta}") from exc
    S = vecS.reshape(n, n, order="F")
    return 0.5 * (S + S.T)


def variation_of_constants_S(sys: StateAffineSystem, u: InputSignal, S0, theta: float,
                             t0: float, t: float, substeps: int = DEFAULT_SUBSTEPS) -> np.ndarray:
    """Closed-form gain ``S(t)`` from the transition matrix.

    ``S(t) = e^{-theta(t-t0)} Phi(t0,t)' S0 Phi(t0,t)
             + int_{t0}^{t} e^{-theta(t-tau)} Phi(tau,t)' C'C Phi(tau,t) dtau``

    With ``Psi = Phi(., t0)`` this equals
    ``e^{-theta(t-t0)} Psi(t)^{-T} [S0 + int e^{theta(tau-t0)} Psi'C'C Psi] Psi(t)^{-1}``,
    and the weighted integral is accumulated on the integration grid.
    """
    if t < t0:
        raise ValidationError(f"need t >= t0, got t0={t0}, t={t}")
    S0 = np.asarray(S0, dtype=float)
    if t == t0:
        return S0.copy()
    As, Qs, lengths, nsteps = _segment_arrays(sys, u, t0, t, substeps)
    Psi, H = _kernels.gram_pass(As, Qs, lengths, nsteps, float(theta))
    return math.exp(-theta * (t - t0)) * _conjugate_inverse(Psi, S0 + H)


def smin_lower_bound(sys: StateAffineSystem, u: InputSignal, theta: float, t0: float,
                     t1: float, t: float, substeps: int = DEFAULT_SUBSTEPS) -> float:
    """``e^{-theta(t1-t0)} lambda_min(Gamma_u(t1, t0))``, a lower bound on ``lambda_min(S(t))``."""
    if not t0 <= t1 <= t:
        raise ValidationError(f"need t0 <= t1 <= t, got {t0}, {t1}, {t}")
    lam = float(np.linalg.eigvalsh(gramian(sys, u, t0, t1, substeps))[0])
    return math.exp(-theta * (t1 - t0)) * max(lam, 0.0)


@dataclass(frozen=True)
class ObserverTrajectory:
    t: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    S: np.ndarray
    error: np.ndarray


def simulate_observer(sys: StateAffineSystem, u: InputSignal, x0, xhat0, S0, theta: float,
                      t0: float | None = None, t1: float | None = None,
                      substeps: int = DEFAULT_SUBSTEPS) -> ObserverTrajectory:
    """Run plant and observer in open loop under a given input on ``[t0, t1]``.

    The observer error ``xhat - x`` is integrated directly, which keeps its
    relative accuracy once it is many orders below the state itself.
    """
    t0 = u.start if t0 is None else t0
    t1 = u.end if t1 is None else t1
    x = np.asarray(x0, dtype=float).copy()
    e = np.asarray(xhat0, dtype=float) - x
    S = np.asarray(S0, dtype=float).copy()
    ts, xs, es, Ss = [t0], [x], [e], [S]
    for a, b, level, m in u.segments(t0, t1, substeps):
        A = np.ascontiguousarray(sys.A_at(level))
        bv = sys.b_at(level)
        C = np.ascontiguousarray(sys.C_at(level))
        X, E, SS = np.empty((m, sys.n)), np.empty((m, sys.n)), np.empty((m, sys.n, sys.n))
        x, e, S, done, status = _kernels.loop_segment(A, bv, C, float(theta), (b - a) / m, m,
                                                      x, e, S, X, E, SS)
        if status != _kernels.STATUS_OK:
            raise GainSingularityError(f"observer integration failed with status {status} near t={a}")
        ts.extend(a + (b - a) * np.arange(1, m + 1) / m)
        xs.extend(X)
        es.extend(E)
        Ss.extend(SS)
    x_arr, e_arr = np.array(xs), np.array(es)
    return ObserverTrajectory(np.array(ts), x_arr, x_arr + e_arr, np.array(Ss), e_arr)
