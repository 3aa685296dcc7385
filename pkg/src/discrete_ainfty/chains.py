"""Chains with rational coefficients and exact sparse graded operators.

A tuple (σ₁,…,σ_p) is indexed by the mixed-radix number Σ idx(σ_i)·S^(p−1−i),
which is also the row/column order produced by ``scipy.sparse.kron``.
Operators hold an int64 numerator matrix and one positive Python-int
denominator, kept in lowest terms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .complex import ComplexError, OrderedComplex, Simplex

TupleBasis = tuple[Simplex, ...]
INT_LIMIT = 2**62


class GradeError(ValueError):
    """Operator/chain grades do not fit together."""


class BlockLeakError(ValueError):
    """An operator maps part of a block outside the block."""


# ------------------------------------------------------------------ chains

@dataclass(frozen=True)
class Chain:
    grade: int
    terms: Mapping[TupleBasis, Fraction]

    def __post_init__(self):
        clean = {}
        for key, val in self.terms.items():
            if len(key) != self.grade:
                raise GradeError(f"term {key} does not have grade {self.grade}")
            val = Fraction(val)
            if val:
                clean[tuple(tuple(s) for s in key)] = val
        object.__setattr__(self, "terms", clean)

    @classmethod
    def basis(cls, *slots: Sequence[int]) -> "Chain":
        key = tuple(tuple(s) for s in slots)
        return cls(len(key), {key: Fraction(1)})

    @classmethod
    def zero(cls, grade: int) -> "Chain":
        return cls(grade, {})

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, *slots: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(tuple(s) for s in slots), Fraction(0))

    def __add__(self, other: "Chain") -> "Chain":
        if other.grade != self.grade:
            raise GradeError("cannot add chains of different grades")
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out.get(k, 0) + v
        return Chain(self.grade, out)

    def __sub__(self, other: "Chain") -> "Chain":
        return self + other.scale(-1)

    def __neg__(self) -> "Chain":
        return self.scale(-1)

    def scale(self, c) -> "Chain":
        c = Fraction(c)
        return Chain(self.grade, {k: v * c for k, v in self.terms.items()})

    def __rmul__(self, c) -> "Chain":
        return self.scale(c)

    def __eq__(self, other) -> bool:
        if isinstance(other, Chain):
            return self.grade == other.grade and self.terms == other.terms
        return NotImplemented

    def __hash__(self):
        return hash((self.grade, frozenset(self.terms.items())))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for key, val in self.terms.items():
            label = "⊗".join("∅" if not s else "{" + ",".join(map(str, s)) + "}" for s in key)
            parts.append(f"{val}·{label}")
        return " + ".join(parts)


# ------------------------------------------------------------- tuple space

@dataclass(frozen=True)
class TupleSpace:
    """Basis of Ω^⊗p with envelope and free-set data per tuple."""

    complex: OrderedComplex
    p: int
    union: np.ndarray = field(repr=False)
    once: np.ndarray = field(repr=False)
    absent: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.complex.size**self.p

    def encode(self, tup: Sequence[Sequence[int]]) -> int:
        if len(tup) != self.p:
            raise GradeError(f"expected a {self.p}-tuple, got {len(tup)}")
        idx = 0
        for s in tup:
            idx = idx * self.complex.size + self.complex.index_of(tuple(s))
        return idx

    def decode(self, idx: int) -> TupleBasis:
        S = self.complex.size
        out = []
        for _ in range(self.p):
            out.append(self.complex.simplexes[idx % S])
            idx //= S
        return tuple(reversed(out))

    def digits(self, idx: np.ndarray) -> np.ndarray:
        S = self.complex.size
        out = np.empty((idx.shape[0], self.p), dtype=np.int64)
        rem = idx.astype(np.int64).copy()
        for pos in range(self.p - 1, -1, -1):
            out[:, pos] = rem % S
            rem //= S
        return out

    def n_vertices(self) -> np.ndarray:
        return np.bitwise_count(self.union).astype(np.int64)

    def n_free(self) -> np.ndarray:
        return np.bitwise_count(self.once).astype(np.int64)

    def forms_only(self) -> np.ndarray:
        """Indices of tuples with no ∅ slot (true forms of degree ≥ 0)."""
        d = self.digits(np.arange(self.size))
        return np.nonzero((d != 0).all(axis=1))[0]


@lru_cache(maxsize=64)
def tuple_space(M: OrderedComplex, p: int) -> TupleSpace:
    if p < 1:
        raise GradeError("tensor grade must be ≥ 1")
    union, once = _kernels.tuple_masks(M.masks, p)
    absent = ~np.isin(union, M.masks)
    for arr in (union, once, absent):
        arr.setflags(write=False)
    return TupleSpace(M, p, union, once, absent)


def enumerate_basis(M: OrderedComplex, p: int, sigma: Sequence[int] | None = None,
                    tau: Iterable[int] | None = None) -> list[TupleBasis]:
    space = tuple_space(M, p)
    if sigma is None and tau is None:
        return [space.decode(i) for i in range(space.size)]
    sel = np.ones(space.size, dtype=bool)
    if sigma is not None:
        sig = M.require(tuple(sigma))
        sel &= (space.union == M.mask_of(sig)) & ~space.absent
    if tau is not None:
        sel &= space.once == M.mask_of(sorted(tau))
        sel &= ~space.absent
    return [space.decode(int(i)) for i in np.nonzero(sel)[0]]


# -------------------------------------------------------- exact sparse ops

def _maxabs(A: sp.spmatrix) -> int:
    return int(np.abs(A.data).max()) if A.nnz else 0


def _reduce(num: sp.csr_matrix, den: int) -> tuple[sp.csr_matrix, int]:
    num.eliminate_zeros()
    if num.nnz == 0:
        return num, 1
    g = gcd(int(np.gcd.reduce(np.abs(num.data))), den)
    if g > 1:
        num = num.copy()
        num.data //= g
        den //= g
    return num, den


def exact_matmul(A: sp.csr_matrix, B: sp.csr_matrix) -> sp.csr_matrix:
    """Integer product with a guard against int64 overflow."""
    if A.nnz == 0 or B.nnz == 0:
        return sp.csr_matrix((A.shape[0], B.shape[1]), dtype=np.int64)
    row_nnz = int(np.diff(A.indptr).max())
    if _maxabs(A) * _maxabs(B) * row_nnz >= INT_LIMIT:
        Af = abs(A).astype(np.float64)
        Bf = abs(B).astype(np.float64)
        bound = (Af @ Bf).max()
        if bound >= INT_LIMIT / 4:
            raise OverflowError("exact product would exceed int64 range")
    return (A @ B).tocsr()


@dataclass(frozen=True, eq=False)
class GradedOperator:
    """Exact linear map Ω^⊗source_grade → Ω^⊗target_grade."""

    complex: OrderedComplex
    source_grade: int
    target_grade: int
    num: sp.csr_matrix = field(repr=False)
    den: int = 1
    degree: int | None = None

    def __post_init__(self):
        num = sp.csr_matrix(self.num, dtype=np.int64)
        S = self.complex.size
        if num.shape != (S**self.target_grade, S**self.source_grade):
            raise GradeError(f"matrix shape {num.shape} does not match grades "
                             f"{self.source_grade}→{self.target_grade}")
        den = int(self.den)
        if den <= 0:
            raise ValueError("denominator must be positive")
        num, den = _reduce(num, den)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    # construction helpers
    @classmethod
    def zero(cls, M: OrderedComplex, source: int, target: int, degree=None) -> "GradedOperator":
        S = M.size
        return cls(M, source, target, sp.csr_matrix((S**target, S**source), dtype=np.int64), 1, degree)

    @classmethod
    def identity(cls, M: OrderedComplex, grade: int) -> "GradedOperator":
        return cls(M, grade, grade, sp.identity(M.size**grade, dtype=np.int64, format="csr"), 1, 0)

    @classmethod
    def from_columns(cls, M: OrderedComplex, source: int, target: int,
                     columns: Mapping[TupleBasis, Chain], degree=None) -> "GradedOperator":
        src = tuple_space(M, source)
        tgt = tuple_space(M, target)
        rows, cols, vals = [], [], []
        den = 1
        for chain in columns.values():
            for v in chain.terms.values():
                den = den * v.denominator // gcd(den, v.denominator)
        for key, chain in columns.items():
            c = src.encode(key)
            for t, v in chain.terms.items():
                rows.append(tgt.encode(t))
                cols.append(c)
                vals.append(int(v * den))
        S = M.size
        num = sp.csr_matrix((np.array(vals, dtype=np.int64), (rows, cols)),
                            shape=(S**target, S**source))
        return cls(M, source, target, num, den, degree)

    # arithmetic
    def __matmul__(self, other: "GradedOperator") -> "GradedOperator":
        if other.target_grade != self.source_grade:
            raise GradeError(f"cannot compose grade {other.target_grade} output "
                             f"with grade {self.source_grade} input")
        deg = None if self.degree is None or other.degree is None else self.degree + other.degree
        return GradedOperator(self.complex, other.source_grade, self.target_grade,
                              exact_matmul(self.num, other.num), self.den * other.den, deg)

    def __add__(self, other: "GradedOperator") -> "GradedOperator":
        if (other.source_grade, other.target_grade) != (self.source_grade, self.target_grade):
            raise GradeError("cannot add operators between different grades")
        L = self.den * other.den // gcd(self.den, other.den)
        a, b = L // self.den, L // other.den
        if _maxabs(self.num) * a + _maxabs(other.num) * b >= INT_LIMIT:
            raise OverflowError("exact sum would exceed int64 range")
        deg = self.degree if self.degree == other.degree else None
        return GradedOperator(self.complex, self.source_grade, self.target_grade,
                              self.num * a + other.num * b, L, deg)

    def __neg__(self) -> "GradedOperator":
        return self.scale(-1)

    def __sub__(self, other: "GradedOperator") -> "GradedOperator":
        return self + (-other)

    def scale(self, c) -> "GradedOperator":
        c = Fraction(c)
        if c == 0:
            return GradedOperator.zero(self.complex, self.source_grade, self.target_grade, self.degree)
        if _maxabs(self.num) * abs(c.numerator) >= INT_LIMIT:
            raise OverflowError("exact scaling would exceed int64 range")
        return GradedOperator(self.complex, self.source_grade, self.target_grade,
                              self.num * c.numerator, self.den * c.denominator, self.degree)

    def transpose(self) -> "GradedOperator":
        deg = None if self.degree is None else -self.degree
        return GradedOperator(self.complex, self.target_grade, self.source_grade,
                              self.num.T.tocsr(), self.den, deg)

    # queries
    @property
    def nnz(self) -> int:
        return self.num.nnz

    def is_zero(self) -> bool:
        return self.num.nnz == 0

    def equals(self, other: "GradedOperator") -> bool:
        return (self - other).is_zero()

    def entry(self, row: int, col: int) -> Fraction:
        return Fraction(int(self.num[row, col]), self.den)

    def restrict_columns(self, cols: np.ndarray) -> "GradedOperator":
        """Same operator with every column outside ``cols`` set to zero."""
        mask = np.zeros(self.num.shape[1], dtype=np.int64)
        mask[cols] = 1
        return GradedOperator(self.complex, self.source_grade, self.target_grade,
                              self.num @ sp.diags(mask), self.den, self.degree)

    def column(self, tup: Sequence[Sequence[int]]) -> Chain:
        src = tuple_space(self.complex, self.source_grade)
        tgt = tuple_space(self.complex, self.target_grade)
        col = self.num[:, [src.encode(tup)]].tocoo()
        return Chain(self.target_grade, {tgt.decode(int(r)): Fraction(int(v), self.den)
                                         for r, v in zip(col.row, col.data)})

    def __call__(self, *slots: Sequence[int]) -> Chain:
        return self.column(slots)

    def apply(self, x: Chain) -> Chain:
        if x.grade != self.source_grade:
            raise GradeError(f"operator expects grade {self.source_grade}, got {x.grade}")
        out = Chain.zero(self.target_grade)
        for key, val in x.terms.items():
            out = out + self.column(key).scale(val)
        return out

    def dense(self, rows: Sequence[int], cols: Sequence[int]) -> list[list[Fraction]]:
        sub = self.num[list(rows)][:, list(cols)].toarray()
        return [[Fraction(int(v), self.den) for v in r] for r in sub]

    def failing_columns(self, cols: np.ndarray | None = None) -> np.ndarray:
        """Columns (optionally among ``cols``) with any nonzero entry."""
        csc = self.num.tocsc()
        nz = np.nonzero(np.diff(csc.indptr))[0]
        if cols is not None:
            nz = np.intersect1d(nz, cols)
        return nz


def operator_from_function(M: OrderedComplex, source: int, target: int, fn,
                           degree=None) -> GradedOperator:
    """Assemble from a generator-wise rule fn(tuple) -> Chain."""
    cols = {t: fn(t) for t in enumerate_basis(M, source)}
    return GradedOperator.from_columns(M, source, target, cols, degree)


# ------------------------------------------------------------------ blocks

def block_indices(M: OrderedComplex, p: int, sigma: Sequence[int], tau: Iterable[int]) -> np.ndarray:
    space = tuple_space(M, p)
    sig = M.require(tuple(sigma))
    tau = sorted(tau)
    if not set(tau) <= set(sig):
        raise ComplexError(f"free set {tau} is not inside {sig}")
    sel = (space.union == M.mask_of(sig)) & (space.once == M.mask_of(tau)) & ~space.absent
    return np.nonzero(sel)[0]


def block(op: GradedOperator, sigma: Sequence[int], tau: Iterable[int]) -> tuple[list[TupleBasis], list[list[Fraction]]]:
    """Restriction of ``op`` to Ω^⊗p(σ,τ); raises BlockLeakError if it escapes."""
    if op.source_grade != op.target_grade:
        raise GradeError("block extraction needs an endomorphism")
    idx = block_indices(op.complex, op.source_grade, sigma, tau)
    sub = op.num[:, idx]
    inside = np.zeros(op.num.shape[0], dtype=bool)
    inside[idx] = True
    rows = sub.tocoo().row
    if rows.size and not inside[rows].all():
        bad = tuple_space(op.complex, op.target_grade).decode(int(rows[~inside[rows]][0]))
        raise BlockLeakError(f"operator leaks from block ({tuple(sigma)}, {tuple(tau)}) to {bad}")
    space = tuple_space(op.complex, op.source_grade)
    return [space.decode(int(i)) for i in idx], op.dense(idx, idx)

