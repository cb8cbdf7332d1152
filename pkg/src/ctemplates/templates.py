"""Piecewise-constant control template families and their numeric certification.

A family is described by N points ``v_0, ..., v_{N-1}`` in R^p with
``v_0 = (1, 0, ..., 0)``.  For a period length ``delta`` the generated input
takes the value ``v_0 + delta (v_k - v_0)`` on the k-th of N equal
subintervals of ``[0, delta]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import genpos
from .errors import ValidationError
from .sysmodel import DEFAULT_SUBSTEPS, InputSignal, StateAffineSystem, gramian_batch

ORTHO_TOL = 1e-10
ANCHOR_TOL = 1e-12

KINDS = ("siso", "genpos", "square", "explicit")


def _e1(p: int) -> np.ndarray:
    e = np.zeros(p)
    e[0] = 1.0
    return e


def siso_template(delta: float, N: int) -> InputSignal:
    """``1 + (delta/N) floor(N s / delta)`` on ``[0, delta]``."""
    if delta <= 0 or N <= 0:
        raise ValidationError(f"need delta > 0 and N > 0, got delta={delta}, N={N}")
    bp = np.linspace(0.0, delta, N + 1)
    bp[-1] = delta
    mids = 0.5 * (bp[:-1] + bp[1:])
    levels = np.array([1.0 + (delta / N) * math.floor(N / delta * s) for s in mids])
    return InputSignal(bp, levels[:, None])


def mimo_template(delta: float, points) -> InputSignal:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[0] == 0:
        raise ValidationError("template needs at least one point", field="points")
    if delta <= 0:
        raise ValidationError(f"delta must be positive, got {delta}", field="delta")
    v0 = pts[0]
    if np.max(np.abs(v0 - _e1(pts.shape[1]))) > ANCHOR_TOL:
        raise ValidationError(f"first point must be (1, 0, ..., 0), got {v0.tolist()}", field="points")
    N = pts.shape[0]
    bp = np.linspace(0.0, delta, N + 1)
    bp[-1] = delta
    levels = v0 + delta * (pts - v0)
    return InputSignal(bp, levels)


def scaled_rotated(v: InputSignal, mu: float, R) -> InputSignal:
    """Replace every level ``u_k`` by ``mu R u_k``."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape != (v.p, v.p):
        raise ValidationError(f"R must be {v.p}x{v.p}, got {R.shape}", field="R")
    if np.linalg.norm(R.T @ R - np.eye(v.p)) > ORTHO_TOL:
        raise ValidationError("R is not orthogonal", field="R")
    if mu < 0:
        raise ValidationError(f"mu must be nonnegative, got {mu}", field="mu")
    return InputSignal(v.breakpoints, mu * v.levels @ R.T)


@dataclass(frozen=True)
class TemplateFamily:
    kind: str
    points: np.ndarray = field(repr=False)
    T: float = math.inf

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.kind not in KINDS:
            raise ValidationError(f"unknown template kind {self.kind!r}", field="template.kind")
        if np.max(np.abs(pts[0] - _e1(pts.shape[1]))) > ANCHOR_TOL:
            raise ValidationError("first template point must be (1, 0, ..., 0)", field="template.points")
        object.__setattr__(self, "points", pts)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    def generate(self, delta: float) -> InputSignal:
        if not 0 < delta <= self.T:
            raise ValidationError(f"delta={delta} outside (0, {self.T}]", field="delta")
        if self.kind == "siso":
            return siso_template(delta, self.N)
        return mimo_template(delta, self.points)

    def kappa(self, delta: float) -> float:
        """Linear class-K bound on ``sup_s |v_delta(s) - v_delta(0)|``."""
        return delta * float(np.max(np.linalg.norm(self.points - self.points[0], axis=1)))


def siso_family(N: int, T: float = math.inf) -> TemplateFamily:
    pts = 1.0 + np.arange(N, dtype=float)[:, None] / N
    return TemplateFamily("siso", pts, T)


def genpos_family(d: int, p: int, anchors=None, T: float = math.inf) -> TemplateFamily:
    gps = genpos.build_general_position(d, p, anchors)
    return TemplateFamily("genpos", genpos.normalize_to_template_origin(gps), T)


def square_family(T: float = math.inf) -> TemplateFamily:
    """Two-input family visiting the corners of a square.

    The second coordinate is the indicator of ``[delta/4, 3 delta/4)`` and
    the first the indicator of ``[delta/2, delta]``, both scaled by delta.
    """
    return TemplateFamily("square", np.array([[1.0, 0.0], [1.0, 1.0], [2.0, 1.0], [2.0, 0.0]]), T)


def explicit_family(points, T: float = math.inf) -> TemplateFamily:
    return TemplateFamily("explicit", points, T)


# -- certification ------------------------------------------------------------


def _rot2(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def random_orthogonal(p: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR factors of a Gaussian sample."""
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    return Q * np.sign(np.diag(R))


def orthogonal_samples(p: int, rot_grid: int, seed: int = 0) -> list[np.ndarray]:
    """Finite sample of O(p) used by :func:`certify_template`.

    p=1 gives both elements exactly.  p=2 gives ``rot_grid`` equispaced
    rotations, each also composed with the reflection ``diag(1, -1)``.
    p>=3 gives ``rot_grid`` seeded random orthogonal matrices.
    """
    if p == 1:
        return [np.array([[1.0]]), np.array([[-1.0]])]
    if p == 2:
        F = np.diag([1.0, -1.0])
        rots = [_rot2(2 * math.pi * k / rot_grid) for k in range(rot_grid)]
        return rots + [r @ F for r in rots]
    rng = np.random.default_rng(seed)
    return [np.eye(p)] + [random_orthogonal(p, rng) for _ in range(max(0, rot_grid - 1))]


@dataclass(frozen=True)
class TemplateCertificate:
    """Sampled lower-bound estimate of ``inf lambda_min(Gamma_{mu R v}(delta, 0))``.

    This is an empirical estimate over a finite grid, not a proof.
    """

    delta: float
    lambda_bar: float
    mu_grid: int
    rot_grid: int
    num_rotations: int
    seed: int
    g_estimate: float
    worst_mu: float
    worst_R: np.ndarray = field(repr=False)

    @property
    def positive(self) -> bool:
        return self.g_estimate > 0.0

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "lambda_bar": self.lambda_bar,
            "grid": {
                "mu_grid": self.mu_grid,
                "mu_values": self.mu_grid + 1,
                "rot_grid": self.rot_grid,
                "orthogonal_samples": self.num_rotations,
                "seed": self.seed,
            },
            "g_estimate": self.g_estimate,
            "positive": self.positive,
            "worst_case": {"mu": self.worst_mu, "R": self.worst_R.tolist()},
        }


def certify_template(sys: StateAffineSystem, family: TemplateFamily, delta: float,
                     lambda_bar: float, mu_grid: int = 50, rot_grid: int = 64, seed: int = 0,
                     substeps: int = DEFAULT_SUBSTEPS) -> TemplateCertificate:
    """Minimum Gramian eigenvalue over scalings ``{0, lambda_bar/mu_grid, ..., lambda_bar}``
    and a finite sample of O(p)."""
    if lambda_bar < 0:
        raise ValidationError(f"lambda_bar must be nonnegative, got {lambda_bar}", field="lambda_bar")
    if mu_grid < 1 or rot_grid < 1:
        raise ValidationError("grid sizes must be positive")
    if family.p != sys.p:
        raise ValidationError(f"family has p={family.p}, system has p={sys.p}", field="template")
    v = family.generate(delta)
    mus = np.linspace(0.0, lambda_bar, mu_grid + 1)
    Rs = orthogonal_samples(sys.p, rot_grid, seed)
    best = (math.inf, 0.0, np.eye(sys.p))
    for R in Rs:
        rotated = v.levels @ R.T
        signals = [InputSignal(v.breakpoints, mu * rotated) for mu in mus]
        eigs = np.linalg.eigvalsh(gramian_batch(sys, signals, substeps))[:, 0]
        k = int(np.argmin(eigs))
        if eigs[k] < best[0]:
            best = (float(eigs[k]), float(mus[k]), R)
    return TemplateCertificate(
        delta=float(delta),
        lambda_bar=float(lambda_bar),
        mu_grid=mu_grid,
        rot_grid=rot_grid,
        num_rotations=len(Rs),
        seed=seed,
        g_estimate=best[0],
        worst_mu=best[1],
        worst_R=np.array(best[2]),
    )
