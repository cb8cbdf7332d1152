"""Sparse multivariate polynomials over the reals and polynomial matrices.

Polynomials are stored as a map from exponent tuples to float coefficients.
Entries of ``A(u)``, ``C(u)``, ``b(u)`` and Kalman-matrix determinants are
all :class:`MultiPoly` instances sharing the same number of variables.
"""
from __future__ import annotations

import functools
import math
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionError, SizeLimitError

#: relative tolerance under which a cancelled coefficient is dropped
PRUNE_RTOL = 1e-12
#: largest matrix handled by cofactor expansion
MAX_DET_SIZE = 6


class _MinusInfinity:
    """Degree of the zero polynomial. Compares below every integer."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __lt__(self, other):
        return other is not self

    def __le__(self, other):
        return True

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return other is self

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __repr__(self):
        return "-inf"

    def __reduce__(self):
        return (_MinusInfinity, ())


MINUS_INFINITY = _MinusInfinity()


def _grlex_key(exps: tuple[int, ...]):
    return (sum(exps), exps)


class MultiPoly:
    """Immutable sparse polynomial in ``num_vars`` real variables.

    Coefficients that are exactly zero are never stored.
    """

    __slots__ = ("num_vars", "_terms", "_hash")

    def __init__(self, num_vars: int, terms: Mapping[Sequence[int], float] | None = None):
        if num_vars < 1:
            raise DimensionError(f"num_vars must be positive, got {num_vars}")
        self.num_vars = int(num_vars)
        clean: dict[tuple[int, ...], float] = {}
        for exps, coeff in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.num_vars:
                raise DimensionError(
                    f"exponent {exps} has length {len(exps)}, expected {self.num_vars}"
                )
            if any(e < 0 for e in exps):
                raise ValueError(f"negative exponent in {exps}")
            c = float(coeff)
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient {coeff!r}")
            c += clean.get(exps, 0.0)
            if c == 0.0:
                clean.pop(exps, None)
            else:
                clean[exps] = c
        self._terms = dict(sorted(clean.items(), key=lambda kv: _grlex_key(kv[0]), reverse=True))
        self._hash = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, num_vars: int) -> "MultiPoly":
        return cls(num_vars)

    @classmethod
    def constant(cls, num_vars: int, value: float) -> "MultiPoly":
        return cls(num_vars, {(0,) * num_vars: value})

    @classmethod
    def variable(cls, num_vars: int, index: int) -> "MultiPoly":
        """The coordinate polynomial ``u_{index}`` (0-based)."""
        if not 0 <= index < num_vars:
            raise DimensionError(f"variable index {index} out of range for {num_vars} vars")
        exps = [0] * num_vars
        exps[index] = 1
        return cls(num_vars, {tuple(exps): 1.0})

    @classmethod
    def from_encoding(cls, num_vars: int, encoded: Iterable) -> "MultiPoly":
        """Build from ``[[coeff, [e_1, ..., e_p]], ...]``."""
        terms: dict[tuple[int, ...], float] = {}
        for item in encoded:
            if len(item) != 2:
                raise ValueError(f"term must be [coefficient, exponents], got {item!r}")
            coeff, exps = item
            exps = tuple(int(e) for e in exps)
            if len(exps) != num_vars:
                raise DimensionError(
                    f"exponent {list(exps)} has length {len(exps)}, expected {num_vars}"
                )
            terms[exps] = terms.get(exps, 0.0) + float(coeff)
        return cls(num_vars, terms)

    def to_encoding(self) -> list:
        return [[c, list(e)] for e, c in self._terms.items()]

    # -- inspection ---------------------------------------------------------

    @property
    def terms(self) -> dict[tuple[int, ...], float]:
        """Copy of the term map, graded-lex descending."""
        return dict(self._terms)

    def coeff(self, exps: Sequence[int]) -> float:
        return self._terms.get(tuple(exps), 0.0)

    def is_zero(self) -> bool:
        return not self._terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self._terms)

    @property
    def degree(self):
        if not self._terms:
            return MINUS_INFINITY
        return max(sum(e) for e in self._terms)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other: "MultiPoly") -> None:
        if self.num_vars != other.num_vars:
            raise DimensionError(
                f"num_vars mismatch: {self.num_vars} vs {other.num_vars}"
            )

    def _coerce(self, other) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return MultiPoly.constant(self.num_vars, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for e, c in other._terms.items():
            a = out.get(e, 0.0)
            s = a + c
            if abs(s) <= PRUNE_RTOL * max(abs(a), abs(c)):
                out.pop(e, None)
            else:
                out[e] = s
        return MultiPoly(self.num_vars, out)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly(self.num_vars, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc: dict[tuple[int, ...], float] = {}
        mag: dict[tuple[int, ...], float] = {}
        for ea, ca in self._terms.items():
            for eb, cb in other._terms.items():
                e = tuple(x + y for x, y in zip(ea, eb))
                acc[e] = acc.get(e, 0.0) + ca * cb
                mag[e] = mag.get(e, 0.0) + abs(ca * cb)
        out = {e: c for e, c in acc.items() if abs(c) > PRUNE_RTOL * mag[e]}
        return MultiPoly(self.num_vars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        out = MultiPoly.constant(self.num_vars, 1.0)
        for _ in range(k):
            out = out * self
        return out

    def __call__(self, u) -> float:
        return poly_eval(self, u)

    def __eq__(self, other):
        if isinstance(other, MultiPoly):
            return self.num_vars == other.num_vars and self._terms == other._terms
        if isinstance(other, (int, float)):
            return self == MultiPoly.constant(self.num_vars, other)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.num_vars, tuple(self._terms.items())))
        return self._hash

    def allclose(self, other: "MultiPoly", rtol: float = 1e-9, atol: float = 0.0) -> bool:
        self._check(other)
        keys = set(self._terms) | set(other._terms)
        return all(
            abs(self.coeff(k) - other.coeff(k)) <= atol + rtol * max(abs(self.coeff(k)), abs(other.coeff(k)))
            for k in keys
        )

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for e, c in self._terms.items():
            mono = "*".join(
                f"u{i + 1}" if k == 1 else f"u{i + 1}^{k}" for i, k in enumerate(e) if k
            )
            parts.append(f"{c:g}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts).replace("+ -", "- ")


def poly_add(a: MultiPoly, b: MultiPoly) -> MultiPoly:
    a._check(b)
    return a + b


def poly_mul(a: MultiPoly, b: MultiPoly) -> MultiPoly:
    a._check(b)
    return a * b


def poly_eval(p: MultiPoly, u) -> float:
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != p.num_vars:
        raise DimensionError(f"point has length {u.shape[0]}, expected {p.num_vars}")
    total = 0.0
    for exps, c in p._terms.items():
        term = c
        for ui, e in zip(u, exps):
            if e:
                term *= ui ** e
        total += term
    return float(total)


def poly_degree(p: MultiPoly):
    return p.degree


class PolyMatrix:
    """Dense ``rows x cols`` matrix of :class:`MultiPoly` entries, row-major."""

    __slots__ = ("rows", "cols", "num_vars", "entries")

    def __init__(self, rows: int, cols: int, entries: Sequence[MultiPoly]):
        if rows < 1 or cols < 1:
            raise DimensionError(f"matrix shape must be positive, got {rows}x{cols}")
        entries = tuple(entries)
        if len(entries) != rows * cols:
            raise DimensionError(f"{len(entries)} entries for a {rows}x{cols} matrix")
        nv = {e.num_vars for e in entries}
        if len(nv) != 1:
            raise DimensionError(f"entries disagree on num_vars: {sorted(nv)}")
        self.rows, self.cols = rows, cols
        self.num_vars = nv.pop()
        self.entries = entries

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[MultiPoly]]) -> "PolyMatrix":
        r = len(rows)
        c = len(rows[0]) if r else 0
        if any(len(row) != c for row in rows):
            raise DimensionError("ragged rows")
        return cls(r, c, [e for row in rows for e in row])

    @classmethod
    def from_numeric(cls, num_vars: int, array) -> "PolyMatrix":
        arr = np.atleast_2d(np.asarray(array, dtype=float))
        r, c = arr.shape
        return cls(r, c, [MultiPoly.constant(num_vars, x) for x in arr.ravel()])

    @classmethod
    def identity(cls, num_vars: int, n: int) -> "PolyMatrix":
        return cls.from_numeric(num_vars, np.eye(n))

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> tuple[MultiPoly, ...]:
        return self.entries[i * self.cols:(i + 1) * self.cols]

    def select_rows(self, idx: Sequence[int]) -> "PolyMatrix":
        return PolyMatrix(len(idx), self.cols, [e for i in idx for e in self.row(i)])

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.cols != other.rows:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        out = []
        for i in range(self.rows):
            for j in range(other.cols):
                acc = MultiPoly.zero(self.num_vars)
                for k in range(self.cols):
                    a, b = self[i, k], other[k, j]
                    if not a.is_zero() and not b.is_zero():
                        acc = acc + a * b
                out.append(acc)
        return PolyMatrix(self.rows, other.cols, out)

    def vstack(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.cols != other.cols:
            raise DimensionError(f"cannot stack {self.shape} on {other.shape}")
        return PolyMatrix(self.rows + other.rows, self.cols, self.entries + other.entries)

    def max_degree(self):
        return max((e.degree for e in self.entries), default=MINUS_INFINITY)

    def evaluate(self, u) -> np.ndarray:
        return np.array([poly_eval(e, u) for e in self.entries]).reshape(self.rows, self.cols)

    def to_encoding(self) -> list:
        return [[self[i, j].to_encoding() for j in range(self.cols)] for i in range(self.rows)]

    @classmethod
    def from_encoding(cls, num_vars: int, encoded) -> "PolyMatrix":
        return cls.from_rows([[MultiPoly.from_encoding(num_vars, e) for e in row] for row in encoded])

    def __repr__(self):
        return f"PolyMatrix({self.rows}x{self.cols}, num_vars={self.num_vars})"


def polymat_det(M: PolyMatrix) -> MultiPoly:
    """Determinant by Laplace expansion along rows, minors memoized by column set."""
    if M.rows != M.cols:
        raise DimensionError(f"determinant of non-square {M.rows}x{M.cols} matrix")
    n = M.rows
    if n > MAX_DET_SIZE:
        raise SizeLimitError(f"cofactor determinant limited to {MAX_DET_SIZE}x{MAX_DET_SIZE}, got {n}")

    @functools.lru_cache(maxsize=None)
    def minor(cols: tuple[int, ...]) -> MultiPoly:
        # rows n-len(cols)..n-1 against the given columns
        i = n - len(cols)
        if len(cols) == 1:
            return M[i, cols[0]]
        acc = MultiPoly.zero(M.num_vars)
        for k, j in enumerate(cols):
            a = M[i, j]
            if a.is_zero():
                continue
            sub = minor(cols[:k] + cols[k + 1:])
            if sub.is_zero():
                continue
            term = a * sub
            acc = acc - term if k % 2 else acc + term
        return acc

    return minor(tuple(range(n)))
