"""Minimal point sets in (d, p)-general position.

A finite set E in R^p is in (d, p)-general position when no nonzero
polynomial of total degree <= d vanishes on all of E.  The construction
takes p + d distinct anchors, forms every monic degree-p polynomial whose
roots are p of those anchors, and uses its coefficient vector as a point.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

RANK_RTOL = 1e-9
ANCHOR_SEPARATION = 1e-9


def coeffs_from_roots(roots) -> np.ndarray:
    """Coefficients ``(v_1, ..., v_p)`` of ``prod (T - r_i) = T^p + v_1 T^{p-1} + ... + v_p``.

    These are the elementary symmetric functions of the roots with
    alternating signs.
    """
    roots = np.asarray(roots, dtype=float).ravel()
    c = np.zeros(roots.size + 1)
    c[0] = 1.0
    for k, r in enumerate(roots, start=1):
        # multiply current polynomial (degree k-1) by (T - r)
        c[1:k + 1] = c[1:k + 1] - r * c[0:k]
    return c[1:]


def monomial_exponents(d: int, p: int) -> list[tuple[int, ...]]:
    """All exponent tuples of length p with total degree <= d, graded-lex."""
    out = []
    for deg in range(d + 1):
        for combo in itertools.combinations_with_replacement(range(p), deg):
            e = [0] * p
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return sorted(set(out), key=lambda e: (sum(e), tuple(-x for x in e)))


def evaluation_matrix(points, d: int) -> np.ndarray:
    """``V[xi, sigma] = v_sigma ** xi`` with rows indexed by monomials of degree <= d."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    p = pts.shape[1]
    exps = np.array(monomial_exponents(d, p), dtype=int)
    return np.prod(pts[None, :, :] ** exps[:, None, :], axis=2)


@dataclass(frozen=True)
class GeneralPositionSet:
    d: int
    p: int
    anchors: tuple[float, ...]
    points: np.ndarray = field(repr=False)
    subsets: tuple[tuple[int, ...], ...] = field(repr=False, default=())


@dataclass(frozen=True)
class GeneralPositionCertificate:
    rank: int
    size: int
    min_singular_value: float
    minimal: bool

    @property
    def general_position(self) -> bool:
        return self.rank == self.size

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "size": self.size,
            "min_singular_value": self.min_singular_value,
            "general_position": self.general_position,
            "minimal": self.minimal,
        }


def build_general_position(d: int, p: int, anchors=None) -> GeneralPositionSet:
    if d < 0 or p < 1:
        raise ValidationError(f"need d >= 0 and p >= 1, got d={d}, p={p}")
    if anchors is None:
        anchors = list(range(p + d))
    anchors = tuple(float(a) for a in anchors)
    if len(anchors) != p + d:
        raise ValidationError(f"expected {p + d} anchors, got {len(anchors)}", field="anchors")
    srt = sorted(anchors)
    for a, b in zip(srt, srt[1:]):
        if b - a <= ANCHOR_SEPARATION:
            raise ValidationError(f"anchors {a} and {b} are not distinct", field="anchors")
    subsets = tuple(itertools.combinations(range(p + d), p))
    points = np.array([coeffs_from_roots([anchors[i] for i in s]) for s in subsets])
    return GeneralPositionSet(d=d, p=p, anchors=anchors, points=points, subsets=subsets)


def _numeric_rank(V: np.ndarray) -> tuple[int, np.ndarray]:
    sv = np.linalg.svd(V, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0, sv
    return int(np.sum(sv > RANK_RTOL * sv[0])), sv


def verify_general_position(gps: GeneralPositionSet) -> GeneralPositionCertificate:
    """Rank of the monomial evaluation matrix and minimality of the set.

    Minimality means every point is needed: deleting any one of them drops
    the rank.  Full rank with exactly ``C(p+d, p)`` points implies this,
    but it is checked directly.
    """
    V = evaluation_matrix(gps.points, gps.d)
    size = V.shape[0]
    rank, sv = _numeric_rank(V)
    minimal = True
    for k in range(V.shape[1]):
        r_k, _ = _numeric_rank(np.delete(V, k, axis=1))
        if r_k >= rank:
            minimal = False
            break
    return GeneralPositionCertificate(
        rank=rank,
        size=size,
        min_singular_value=float(sv[min(size, V.shape[1]) - 1]) if sv.size else 0.0,
        minimal=minimal,
    )


def normalize_to_template_origin(gps: GeneralPositionSet) -> np.ndarray:
    """Translate the points so that the first one sits at ``(1, 0, ..., 0)``."""
    pts = np.array(gps.points, dtype=float)
    target = np.zeros(gps.p)
    target[0] = 1.0
    return pts + (target - pts[0])


def expected_size(d: int, p: int) -> int:
    return math.comb(p + d, p)
