"""State-affine systems ``x' = A(u) x + b(u)``, ``y = C(u) x``.

Transition matrices and observability Gramians are computed for
piecewise-constant inputs by fixed-step RK4 on a grid that contains every
input breakpoint, so each step sees a constant ``A(u)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DimensionError, DomainError, NotObservableAtTarget, ValidationError
from .polyalg import MultiPoly, PolyMatrix, polymat_det

DEFAULT_SUBSTEPS = 20
RANK_RTOL = 1e-9


class _Evaluator:
    """Vectorised evaluation of a list of polynomials at one point."""

    def __init__(self, polys: Sequence[MultiPoly], num_vars: int):
        coeffs, exps, idx = [], [], []
        for k, poly in enumerate(polys):
            for e, c in poly.terms.items():
                coeffs.append(c)
                exps.append(e)
                idx.append(k)
        self.size = len(polys)
        self.coeffs = np.array(coeffs, dtype=float)
        self.exps = np.array(exps, dtype=float).reshape(-1, num_vars)
        self.idx = np.array(idx, dtype=np.intp)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if self.coeffs.size == 0:
            return np.zeros(self.size)
        mono = np.prod(u[None, :] ** self.exps, axis=1)
        return np.bincount(self.idx, weights=self.coeffs * mono, minlength=self.size)

    def batch(self, U: np.ndarray) -> np.ndarray:
        """Evaluate at every row of ``U``; returns shape ``(len(U), size)``."""
        if self.coeffs.size == 0:
            return np.zeros((U.shape[0], self.size))
        mono = np.prod(U[:, None, :] ** self.exps[None, :, :], axis=2) * self.coeffs
        out = np.zeros((U.shape[0], self.size))
        np.add.at(out, (slice(None), self.idx), mono)
        return out


class StateAffineSystem:
    """Polynomial state-affine system with ``n`` states, ``m`` outputs, ``p`` inputs."""

    def __init__(self, A: PolyMatrix, C: PolyMatrix, b: Sequence[MultiPoly]):
        n = A.rows
        if A.cols != n:
            raise DimensionError(f"A must be square, got {A.shape}")
        if C.cols != n:
            raise DimensionError(f"C must have {n} columns, got {C.shape}")
        b = tuple(b)
        if len(b) != n:
            raise DimensionError(f"b must have {n} entries, got {len(b)}")
        p = A.num_vars
        if C.num_vars != p or any(e.num_vars != p for e in b):
            raise DimensionError("A, C and b must share the number of input variables")
        self.n, self.m, self.p = n, C.rows, p
        self.A, self.C, self.b = A, C, b
        self._evA = _Evaluator(A.entries, p)
        self._evC = _Evaluator(C.entries, p)
        self._evb = _Evaluator(b, p)

    @classmethod
    def from_numeric(cls, A, C, b=None, p: int = 1) -> "StateAffineSystem":
        """Input-independent system (useful for tests and LTI checks)."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n = A.shape[0]
        b = np.zeros(n) if b is None else np.asarray(b, dtype=float)
        return cls(
            PolyMatrix.from_numeric(p, A),
            PolyMatrix.from_numeric(p, np.atleast_2d(C)),
            [MultiPoly.constant(p, v) for v in b],
        )

    def _u(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float).ravel()
        if u.shape[0] != self.p:
            raise DimensionError(f"input has length {u.shape[0]}, expected {self.p}")
        return u

    def A_at(self, u) -> np.ndarray:
        return self._evA(self._u(u)).reshape(self.n, self.n)

    def C_at(self, u) -> np.ndarray:
        return self._evC(self._u(u)).reshape(self.m, self.n)

    def b_at(self, u) -> np.ndarray:
        return self._evb(self._u(u))

    def A_batch(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        return self._evA.batch(U).reshape(-1, self.n, self.n)

    def C_batch(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        return self._evC.batch(U).reshape(-1, self.m, self.n)

    @property
    def deg_A(self) -> int:
        return max(0, self.A.max_degree())

    @property
    def deg_C(self) -> int:
        return max(0, self.C.max_degree())

    def degree_bound(self) -> int:
        """``n deg C + n(n-1)/2 deg A``: bound on the degree of any n x n Kalman minor."""
        n = self.n
        return n * self.deg_C + n * (n - 1) // 2 * self.deg_A

    def __repr__(self):
        return f"StateAffineSystem(n={self.n}, m={self.m}, p={self.p})"


class InputSignal:
    """Piecewise-constant input: ``levels[k]`` on ``[breakpoints[k], breakpoints[k+1])``."""

    def __init__(self, breakpoints, levels):
        bp = np.asarray(breakpoints, dtype=float).ravel()
        lv = np.asarray(levels, dtype=float)
        if lv.ndim == 1:
            lv = lv[:, None]
        if bp.size < 2 or lv.shape[0] != bp.size - 1:
            raise ValidationError(
                f"{bp.size} breakpoints need {bp.size - 1} levels, got {lv.shape[0]}"
            )
        if np.any(np.diff(bp) <= 0):
            raise ValidationError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(lv)) or not np.all(np.isfinite(bp)):
            raise ValidationError("breakpoints and levels must be finite")
        self.breakpoints = bp
        self.levels = lv
        self.breakpoints.flags.writeable = False
        self.levels.flags.writeable = False

    @classmethod
    def constant(cls, u, duration: float) -> "InputSignal":
        return cls([0.0, float(duration)], np.atleast_2d(np.asarray(u, dtype=float)))

    @property
    def p(self) -> int:
        return self.levels.shape[1]

    @property
    def start(self) -> float:
        return float(self.breakpoints[0])

    @property
    def end(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def num_segments(self) -> int:
        return self.levels.shape[0]

    def __call__(self, s: float) -> np.ndarray:
        """Right-continuous value; the last level is kept at the right endpoint."""
        if s < self.start or s > self.end:
            raise DomainError(f"time {s} outside [{self.start}, {self.end}]")
        k = int(np.searchsorted(self.breakpoints, s, side="right")) - 1
        return self.levels[min(k, self.num_segments - 1)].copy()

    def map_levels(self, fn) -> "InputSignal":
        return InputSignal(self.breakpoints, np.array([fn(v) for v in self.levels]))

    def segments(self, a: float, b: float, substeps: int = DEFAULT_SUBSTEPS):
        """Pieces of ``[a, b]`` on which the input is constant.

        Yields ``(t_start, t_end, level, nsteps)``.  A full segment gets
        ``substeps`` steps; a partial one proportionally many (at least 1).
        """
        tol = 1e-12 * max(1.0, abs(self.end))
        if a < self.start - tol or b > self.end + tol:
            raise DomainError(f"interval [{a}, {b}] outside [{self.start}, {self.end}]")
        out = []
        for k in range(self.num_segments):
            lo, hi = self.breakpoints[k], self.breakpoints[k + 1]
            s0, s1 = max(a, lo), min(b, hi)
            if s1 - s0 <= tol:
                continue
            frac = (s1 - s0) / (hi - lo)
            nsteps = max(1, int(math.ceil(substeps * frac - 1e-9)))
            out.append((s0, s1, self.levels[k], nsteps))
        return out

    def __eq__(self, other):
        if not isinstance(other, InputSignal):
            return NotImplemented
        return np.array_equal(self.breakpoints, other.breakpoints) and np.array_equal(
            self.levels, other.levels
        )

    def __repr__(self):
        return f"InputSignal(K={self.num_segments}, domain=[{self.start}, {self.end}])"


# -- symbolic observability ---------------------------------------------------


def kalman_matrix(sys: StateAffineSystem) -> PolyMatrix:
    """Stack ``C, CA, ..., CA^{n-1}`` as an ``mn x n`` polynomial matrix."""
    block = sys.C
    out = block
    for _ in range(sys.n - 1):
        block = block @ sys.A
        out = out.vstack(block)
    return out


def _numeric_rank(M: np.ndarray) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > RANK_RTOL * sv[0]))


@dataclass(frozen=True)
class MinorSelection:
    row_indices: tuple[int, ...]
    det: MultiPoly
    degree: int
    degree_bound: int


def check_observable_at_target(sys: StateAffineSystem, O: PolyMatrix | None = None) -> np.ndarray:
    """Raise :class:`NotObservableAtTarget` unless the Kalman matrix at ``u=0`` has rank n."""
    O = kalman_matrix(sys) if O is None else O
    O0 = O.evaluate(np.zeros(sys.p))
    if _numeric_rank(O0) < sys.n:
        raise NotObservableAtTarget(
            "pair (C(0), A(0)) is not observable: Kalman matrix at u=0 is rank deficient",
            field="system",
        )
    return O0


def find_full_rank_minor(sys: StateAffineSystem) -> MinorSelection:
    """Pick n rows of the Kalman matrix that are independent at ``u=0``.

    The determinant of the selected square block is a polynomial that does
    not vanish at the origin, hence is nonzero.
    """
    O = kalman_matrix(sys)
    O0 = check_observable_at_target(sys, O)
    rows: list[int] = []
    for i in range(O.rows):
        if _numeric_rank(O0[rows + [i]]) == len(rows) + 1:
            rows.append(i)
            if len(rows) == sys.n:
                break
    det = polymat_det(O.select_rows(rows))
    return MinorSelection(
        row_indices=tuple(rows),
        det=det,
        degree=det.degree,
        degree_bound=sys.degree_bound(),
    )


# -- numeric flows ------------------------------------------------------------


def _segment_arrays(sys: StateAffineSystem, u: InputSignal, a: float, b: float, substeps: int):
    segs = u.segments(a, b, substeps)
    U = np.array([lv for _, _, lv, _ in segs]).reshape(len(segs), sys.p)
    As = np.ascontiguousarray(sys.A_batch(U))
    Cs = sys.C_batch(U)
    Qs = np.ascontiguousarray(np.einsum("kmi,kmj->kij", Cs, Cs))
    lengths = np.array([t1 - t0 for t0, t1, _, _ in segs])
    nsteps = np.array([m for _, _, _, m in segs], dtype=np.int64)
    return As, Qs, lengths, nsteps


def _flow(sys, u, a, b, substeps, theta=0.0):
    if b <= a:
        return np.eye(sys.n), np.zeros((sys.n, sys.n))
    As, Qs, lengths, nsteps = _segment_arrays(sys, u, a, b, substeps)
    return _kernels.gram_pass(As, Qs, lengths, nsteps, float(theta))


def transition_matrix(sys: StateAffineSystem, u: InputSignal, s: float, t: float,
                      substeps: int = DEFAULT_SUBSTEPS) -> np.ndarray:
    """``Phi_u(t, s)``; ``t < s`` is allowed and returns the inverse flow."""
    for name, val in (("s", s), ("t", t)):
        if val < u.start or val > u.end:
            raise DomainError(f"{name}={val} outside input domain [{u.start}, {u.end}]")
    if s == t:
        return np.eye(sys.n)
    lo, hi = min(s, t), max(s, t)
    Psi, _ = _flow(sys, u, lo, hi, substeps)
    return Psi if t > s else np.linalg.inv(Psi)


def _conjugate_inverse(Psi: np.ndarray, G: np.ndarray) -> np.ndarray:
    """``Psi^{-T} G Psi^{-1}``, symmetrised. Works on stacks of matrices."""
    PsiT = np.swapaxes(Psi, -1, -2)
    M = np.linalg.solve(PsiT, G)
    out = np.swapaxes(np.linalg.solve(PsiT, np.swapaxes(M, -1, -2)), -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def gramian(sys: StateAffineSystem, u: InputSignal, s: float, t: float,
            substeps: int = DEFAULT_SUBSTEPS) -> np.ndarray:
    """Backward observability Gramian ``Gamma_u(t, s)``.

    Integrates ``Psi = Phi(., s)`` together with ``int Psi' C'C Psi`` from
    ``s`` to ``t`` and conjugates by ``Psi(t)^{-1}``, since
    ``Phi(tau, t) = Psi(tau) Psi(t)^{-1}``.
    """
    if s > t:
        raise ValidationError(f"gramian needs s <= t, got s={s}, t={t}")
    if s < u.start or t > u.end:
        raise DomainError(f"[{s}, {t}] outside input domain [{u.start}, {u.end}]")
    if s == t:
        return np.zeros((sys.n, sys.n))
    Psi, G = _flow(sys, u, s, t, substeps)
    return _conjugate_inverse(Psi, G)


def gramian_batch(sys: StateAffineSystem, signals: Sequence[InputSignal],
                  substeps: int = DEFAULT_SUBSTEPS) -> np.ndarray:
    """``Gamma(end, start)`` for many signals sharing one breakpoint layout."""
    first = signals[0]
    segs = first.segments(first.start, first.end, substeps)
    lengths = np.array([t1 - t0 for t0, t1, _, _ in segs])
    nsteps = np.array([m for _, _, _, m in segs], dtype=np.int64)
    U = np.stack([sig.levels for sig in signals])  # (B, K, p)
    B, K = U.shape[0], U.shape[1]
    flat = U.reshape(B * K, sys.p)
    As = np.ascontiguousarray(sys.A_batch(flat).reshape(B, K, sys.n, sys.n))
    Cs = sys.C_batch(flat)
    Qs = np.ascontiguousarray(np.einsum("kmi,kmj->kij", Cs, Cs).reshape(B, K, sys.n, sys.n))
    Psis, Gs = _kernels.gram_pass_batch(As, Qs, lengths, nsteps, 0.0)
    return _conjugate_inverse(Psis, Gs)


def observable_at(sys: StateAffineSystem, u, horizon: float = 0.5, tol: float = 1e-8,
                  substeps: int = DEFAULT_SUBSTEPS) -> bool:
    """Gramian test for a constant input: ``lambda_min(Gamma(horizon, 0)) > tol``."""
    return min_gramian_eig(sys, u, horizon, substeps) > tol


def min_gramian_eig(sys: StateAffineSystem, u, horizon: float = 0.5,
                    substeps: int = DEFAULT_SUBSTEPS) -> float:
    if horizon <= 0:
        raise ValidationError(f"horizon must be positive, got {horizon}")
    sig = InputSignal.constant(sys._u(u), horizon)
    return float(np.linalg.eigvalsh(gramian(sys, sig, 0.0, horizon, substeps))[0])


def kalman_rank_at(sys: StateAffineSystem, u) -> int:
    """Numeric rank of the Kalman matrix built from ``A(u), C(u)``."""
    A, C = sys.A_at(u), sys.C_at(u)
    blocks = [C]
    for _ in range(sys.n - 1):
        blocks.append(blocks[-1] @ A)
    return _numeric_rank(np.vstack(blocks))
