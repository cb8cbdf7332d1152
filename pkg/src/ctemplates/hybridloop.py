"""Hybrid closed loop: plant, observer and a periodically refreshed template input.

During flow the input is ``u = mu R v_delta(s)`` with the timer ``s``
running from 0 to ``delta``.  When ``s`` reaches ``delta`` the loop jumps:
``s`` resets, ``mu = |lambda(xhat)|`` and ``R`` is any orthogonal matrix
with ``R (mu, 0, ..., 0)' = lambda(xhat)``.  Plant, estimate and gain are
continuous across jumps.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _kernels
from .errors import DivergenceError, GainSingularityError, ValidationError
from .sysmodel import StateAffineSystem
from .templates import ORTHO_TOL, TemplateFamily


def saturate(x, radius: float | None) -> np.ndarray:
    """Radial clamp onto the ball of the given radius (identity when ``radius`` is None)."""
    x = np.asarray(x, dtype=float)
    if radius is None:
        return x.copy()
    r = float(np.linalg.norm(x))
    if r <= radius:
        return x.copy()
    return x * (radius / r)


def rotation_to(v) -> np.ndarray:
    """An orthogonal ``R`` with ``R (|v|, 0, ..., 0)' = v``.

    Uses the Householder reflection exchanging ``e1`` and ``v/|v|``; returns
    the identity when ``v`` is zero or already along ``+e1``.
    """
    v = np.asarray(v, dtype=float).ravel()
    p = v.size
    r = float(np.linalg.norm(v))
    if r == 0.0:
        return np.eye(p)
    w = v / r
    tail = w[1:]
    tail_sq = float(tail @ tail)
    if tail_sq == 0.0 and w[0] > 0:
        return np.eye(p)
    z = np.empty(p)
    # 1 - w1 without cancellation when w is close to e1
    z[0] = tail_sq / (1.0 + w[0]) if w[0] > 0 else 1.0 - w[0]
    z[1:] = -tail
    return np.eye(p) - 2.0 * np.outer(z, z) / float(z @ z)


@dataclass(frozen=True)
class FeedbackLaw:
    """State feedback ``lambda``, applied to the saturated estimate.

    Either a linear gain ``K`` (p x n) or a callable ``fn(x) -> R^p`` with
    ``fn(0) = 0``.
    """

    K: np.ndarray | None = None
    fn: Callable | None = field(default=None, compare=False)
    radius: float | None = None

    def __post_init__(self):
        if (self.K is None) == (self.fn is None):
            raise ValidationError("give exactly one of K or fn", field="feedback")
        if self.K is not None:
            object.__setattr__(self, "K", np.atleast_2d(np.asarray(self.K, dtype=float)))
        if self.radius is not None and not self.radius > 0:
            raise ValidationError(f"saturation radius must be positive, got {self.radius}",
                                  field="feedback.saturation_radius")

    @property
    def kind(self) -> str:
        return "linear" if self.K is not None else "custom"

    def raw(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.K is not None:
            return self.K @ x
        return np.asarray(self.fn(x), dtype=float).ravel()

    def __call__(self, xhat) -> np.ndarray:
        return self.raw(saturate(xhat, self.radius))

    def check_origin(self, n: int) -> None:
        if np.any(self.raw(np.zeros(n)) != 0.0):
            raise ValidationError("feedback must vanish at the origin", field="feedback")

    def sup_norm_on_ball(self, radius: float) -> float:
        """``sup |lambda(sat(x))|`` over ``|x| <= radius`` (exact for linear laws)."""
        if self.radius is not None:
            radius = min(radius, self.radius)
        if self.K is None:
            raise ValidationError("sup over a ball needs a linear feedback", field="feedback")
        return float(np.linalg.norm(self.K, 2) * radius)


@dataclass(frozen=True)
class LoopState:
    x: np.ndarray
    xhat: np.ndarray
    S: np.ndarray
    s: float = 0.0
    mu: float = 0.0
    R: np.ndarray | None = None
    jump_count: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xhat", np.asarray(self.xhat, dtype=float).ravel())
        object.__setattr__(self, "S", np.atleast_2d(np.asarray(self.S, dtype=float)))
        if self.mu < 0:
            raise ValidationError(f"mu must be nonnegative, got {self.mu}", field="mu")
        if self.R is not None:
            R = np.atleast_2d(np.asarray(self.R, dtype=float))
            if np.linalg.norm(R.T @ R - np.eye(R.shape[0])) > ORTHO_TOL:
                raise ValidationError("R is not orthogonal", field="R")
            object.__setattr__(self, "R", R)


def initial_state(x0, xhat0, S0, law: FeedbackLaw, p: int, s0: float = 0.0) -> LoopState:
    """Loop state whose input at ``s0`` already matches ``lambda(xhat0)``."""
    lam = law(xhat0)
    if lam.size != p:
        raise ValidationError(f"feedback returns {lam.size} values, expected {p}", field="feedback")
    return LoopState(x0, xhat0, S0, s=s0, mu=float(np.linalg.norm(lam)), R=rotation_to(lam))


def jump(state: LoopState, law: FeedbackLaw) -> LoopState:
    lam = law(state.xhat)
    return replace(state, s=0.0, mu=float(np.linalg.norm(lam)), R=rotation_to(lam),
                   jump_count=state.jump_count + 1)


@dataclass
class HybridTrajectory:
    """Grid samples on a hybrid time domain.

    At a jump the time repeats with ``j`` incremented; the first record of
    the pair is the pre-jump state.  ``u`` is the input applied from each
    sample onwards, except at pre-jump samples where it is the value just
    before the jump.

    The observer error is kept as ``err_scaled * 2**err_exp2`` so its decay
    can be followed below the floating-point underflow threshold.
    """

    t: np.ndarray
    j: np.ndarray
    x: np.ndarray
    err_scaled: np.ndarray
    err_exp2: np.ndarray
    S: np.ndarray
    u: np.ndarray
    s: np.ndarray
    mu: np.ndarray
    jump_times: np.ndarray
    theta: float
    delta: float

    @property
    def err(self) -> np.ndarray:
        return np.ldexp(self.err_scaled, self.err_exp2[:, None])

    @property
    def xhat(self) -> np.ndarray:
        return self.x + self.err

    @property
    def err_norm(self) -> np.ndarray:
        return np.ldexp(np.linalg.norm(self.err_scaled, axis=1), self.err_exp2)

    @property
    def log10_err_norm(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log10(np.linalg.norm(self.err_scaled, axis=1)) + self.err_exp2 * math.log10(2.0)

    def S_eig_extremes(self) -> tuple[np.ndarray, np.ndarray]:
        ev = np.linalg.eigvalsh(self.S)
        return ev[:, 0], ev[:, -1]

    def summary(self) -> dict:
        return {
            "final_time": float(self.t[-1]),
            "final_state_norm": float(np.linalg.norm(self.x[-1])),
            "final_error_norm": float(self.err_norm[-1]),
            "final_log10_error_norm": float(self.log10_err_norm[-1]),
            "initial_state_norm": float(np.linalg.norm(self.x[0])),
            "initial_error_norm": float(self.err_norm[0]),
            "jump_count": int(self.j[-1]),
            "samples": int(self.t.size),
        }

    def to_csv(self, path=None) -> str:
        """CSV with 17 significant digits; returns the text and writes it if ``path`` given."""
        n, p = self.x.shape[1], self.u.shape[1]
        header = (["t", "j"] + [f"x_{i + 1}" for i in range(n)] + [f"xhat_{i + 1}" for i in range(n)]
                  + ["err_norm", "log10_err_norm"] + [f"u_{i + 1}" for i in range(p)]
                  + ["s_timer", "mu", "S_min_eig", "S_max_eig"])
        smin, smax = self.S_eig_extremes()
        en, logerr, xh = self.err_norm, self.log10_err_norm, self.xhat
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        f = "{:.17g}".format
        for k in range(self.t.size):
            w.writerow([f(self.t[k]), str(int(self.j[k]))]
                       + [f(v) for v in self.x[k]] + [f(v) for v in xh[k]]
                       + [f(en[k]), f(logerr[k])] + [f(v) for v in self.u[k]]
                       + [f(self.s[k]), f(self.mu[k]), f(smin[k]), f(smax[k])])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def simulate(sys: StateAffineSystem, family: TemplateFamily, law: FeedbackLaw, theta: float,
             delta: float, init: LoopState, T_final: float, substeps: int = 20) -> HybridTrajectory:
    """Integrate the hybrid loop on ``[0, T_final]``.

    The step is ``delta / (N substeps)`` so every template breakpoint and
    every jump falls on a grid node; ``init.s`` and ``T_final`` are rounded
    to that grid.  No jump is applied at ``T_final`` itself.
    """
    if theta <= 0:
        raise ValidationError(f"theta must be positive, got {theta}", field="theta")
    if substeps < 1:
        raise ValidationError(f"substeps must be >= 1, got {substeps}", field="substeps")
    if not 0 <= init.s <= delta:
        raise ValidationError(f"timer s={init.s} outside [0, {delta}]", field="s0")
    if init.x.size != sys.n or init.xhat.size != sys.n or init.S.shape != (sys.n, sys.n):
        raise ValidationError("initial state dimensions do not match the system", field="initial")
    if family.p != sys.p:
        raise ValidationError(f"template has p={family.p}, system has p={sys.p}", field="template")
    try:
        np.linalg.cholesky(init.S)
    except np.linalg.LinAlgError as exc:
        raise ValidationError("initial gain S0 is not positive-definite", field="S0") from exc

    v = family.generate(delta)
    N = v.num_segments
    per_period = N * substeps
    h = delta / per_period
    total_steps = int(round(T_final / h))
    if total_steps < 1:
        raise ValidationError(f"T_final={T_final} shorter than one step", field="T_final")
    pos = int(round(init.s / h))  # grid index inside the current period

    n, p = sys.n, sys.p
    x = init.x.copy()
    e = init.xhat - init.x
    e_exp = 0
    S = init.S.copy()
    mu = float(init.mu)
    R = np.eye(p) if init.R is None else init.R
    jcount = init.jump_count

    def seg_data(mu, R):
        levels = mu * (v.levels @ R.T)
        return levels, [(np.ascontiguousarray(sys.A_at(u)), sys.b_at(u),
                         np.ascontiguousarray(sys.C_at(u))) for u in levels]

    def level_index(k):
        return min(k // substeps, N - 1)

    levels, mats = seg_data(mu, R)

    cap = total_steps + total_steps // per_period + 3
    T = np.empty(cap)
    J = np.empty(cap, dtype=np.int64)
    X = np.empty((cap, n))
    E = np.empty((cap, n))
    EX = np.empty(cap, dtype=np.int64)
    SS = np.empty((cap, n, n))
    U = np.empty((cap, p))
    Sig = np.empty(cap)
    MU = np.empty(cap)
    jump_times = []
    row = 0

    def record(t, u_val, s_val):
        nonlocal row
        T[row], J[row], X[row], E[row], EX[row], SS[row] = t, jcount, x, e, e_exp, S
        U[row], Sig[row], MU[row] = u_val, s_val, mu
        row += 1

    record(0.0, levels[level_index(pos)], pos * h)
    bufX = np.empty((substeps, n))
    bufE = np.empty((substeps, n))
    bufS = np.empty((substeps, n, n))
    step = 0
    while True:
        if step >= total_steps:
            break
        if pos >= per_period:
            t_now = step * h
            jump_times.append(t_now)
            lam = law(x + np.ldexp(e, e_exp))
            mu = float(np.linalg.norm(lam))
            R = rotation_to(lam)
            jcount += 1
            pos = 0
            levels, mats = seg_data(mu, R)
            record(t_now, levels[0], 0.0)
        k = level_index(pos)
        m = min((k + 1) * substeps - pos, total_steps - step)
        A, b, C = mats[k]
        # overflow is reported through the status code, not numpy warnings
        with np.errstate(over="ignore", invalid="ignore"):
            x, e, S, done, status = _kernels.loop_segment(A, b, C, float(theta), h, m, x, e, S,
                                                          bufX, bufE, bufS)
        for i in range(done):
            pos_i = pos + i + 1
            T[row], J[row], X[row], E[row], EX[row], SS[row] = (
                (step + i + 1) * h, jcount, bufX[i], bufE[i], e_exp, bufS[i])
            U[row], Sig[row], MU[row] = levels[level_index(pos_i)], pos_i * h, mu
            row += 1
        if status != _kernels.STATUS_OK:
            t_fail = (step + done) * h
            if status == _kernels.STATUS_NONFINITE:
                last = {"t": float(T[row - 1]), "j": int(J[row - 1]), "x": X[row - 1].copy(),
                        "xhat": X[row - 1] + np.ldexp(E[row - 1], EX[row - 1]),
                        "S": SS[row - 1].copy()}
                raise DivergenceError(f"non-finite state at t={t_fail:.6g}", last_sample=last)
            raise GainSingularityError(f"observer gain singular at t={t_fail:.6g} (status {status})")
        # exact power-of-two rescaling; the error dynamics are linear in e
        big = float(np.max(np.abs(e)))
        if big > 0.0:
            shift = math.frexp(big)[1]
            e = np.ldexp(e, -shift)
            e_exp += shift
        step += m
        pos += m

    return HybridTrajectory(
        t=T[:row].copy(), j=J[:row].copy(), x=X[:row].copy(), err_scaled=E[:row].copy(),
        err_exp2=EX[:row].copy(), S=SS[:row].copy(), u=U[:row].copy(), s=Sig[:row].copy(),
        mu=MU[:row].copy(), jump_times=np.array(jump_times), theta=float(theta), delta=float(delta),
    )


def first_jump_time(delta: float, s0: float) -> float:
    return delta - s0


def log_weighted_lyapunov(traj: HybridTrajectory, t0: float) -> tuple[np.ndarray, np.ndarray]:
    """``(t, log(e^{theta(t-t0)} err' S err))`` for samples with ``t >= t0``."""
    mask = traj.t >= t0 - 1e-12
    es, S = traj.err_scaled[mask], traj.S[mask]
    q = np.einsum("ki,kij,kj->k", es, S, es)
    with np.errstate(divide="ignore"):
        logV = np.log(q) + 2.0 * math.log(2.0) * traj.err_exp2[mask]
    return traj.t[mask], traj.theta * (traj.t[mask] - t0) + logV


def log_error_bound_margin(traj: HybridTrajectory, t0: float) -> np.ndarray:
    """``log|err(t)| - log(bound(t))`` for ``t >= t0``; nonpositive means the bound holds.

    ``bound(t) = e^{-theta(t-t0)/2} sqrt(S_max(t0) / S_min(t)) |err(t0)|``.
    """
    smin, smax = traj.S_eig_extremes()
    mask = traj.t >= t0 - 1e-12
    i0 = int(np.argmax(mask))
    loge = traj.log10_err_norm * math.log(10.0)
    log_bound = (-0.5 * traj.theta * (traj.t[mask] - traj.t[i0])
                 + 0.5 * np.log(smax[i0] / smin[mask]) + loge[i0])
    return loge[mask] - log_bound
