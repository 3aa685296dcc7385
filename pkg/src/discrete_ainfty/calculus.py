"""The generating operations d, ∂, ∧ and the lifting rule to tensor grades."""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .chains import Chain, GradedOperator, GradeError, operator_from_function
from .complex import OrderedComplex, Simplex, dim, parity_beta


def d_form(sigma: Sequence[int], M: OrderedComplex) -> Chain:
    sigma = M.require(tuple(sigma))
    terms = {}
    for x in M.vertices:
        if x in sigma:
            continue
        up = tuple(sorted(sigma + (x,)))
        if up in M:
            terms[(up,)] = -parity_beta((x,), up)
    return Chain(1, terms)


def del_form(sigma: Sequence[int], M: OrderedComplex) -> Chain:
    sigma = M.require(tuple(sigma))
    terms = {}
    for x in sigma:
        down = tuple(v for v in sigma if v != x)
        terms[(down,)] = -parity_beta((x,), sigma)
    return Chain(1, terms)


def wedge_sign(a: Simplex, b: Simplex, union: Simplex) -> int:
    shared = tuple(set(a) & set(b))
    da = dim(a)
    # (−1)^{da(da−1)/2} restores skew-symmetry and the Leibniz rule
    return parity_beta(a, union) * parity_beta(shared, b) * (-1) ** (da * (da - 1) // 2)


def wedge_pair(a: Sequence[int], b: Sequence[int], M: OrderedComplex) -> Chain:
    a, b = M.require(tuple(a)), M.require(tuple(b))
    if len(set(a) & set(b)) != 1:
        return Chain.zero(1)
    union = tuple(sorted(set(a) | set(b)))
    if union not in M:
        return Chain.zero(1)
    da, db = dim(a), dim(b)
    coeff = Fraction(factorial(da) * factorial(db), factorial(da + db + 1))
    return Chain(1, {(union,): coeff * wedge_sign(a, b, union)})


@lru_cache(maxsize=32)
def d_operator(M: OrderedComplex) -> GradedOperator:
    return operator_from_function(M, 1, 1, lambda t: d_form(t[0], M), degree=1)


@lru_cache(maxsize=32)
def del_operator(M: OrderedComplex) -> GradedOperator:
    return operator_from_function(M, 1, 1, lambda t: del_form(t[0], M), degree=-1)


@lru_cache(maxsize=32)
def wedge_operator(M: OrderedComplex) -> GradedOperator:
    return operator_from_function(M, 2, 1, lambda t: wedge_pair(t[0], t[1], M), degree=0)


def xi(j: int, p: int, prefix_degree: int) -> int:
    return (j + 1) * (p + 1) + p * prefix_degree


def _prefix_signs(M: OrderedComplex, j: int, p: int) -> sp.csr_matrix:
    """Diagonal of (−1)^{p·(|ω₁|+…+|ω_j|)} over S^j."""
    one = np.where((p * M.degrees) % 2 == 0, 1, -1).astype(np.int64)
    diag = np.ones(1, dtype=np.int64)
    for _ in range(j):
        diag = np.kron(diag, one)
    return sp.diags(diag, format="csr", dtype=np.int64)


def lift(core: GradedOperator, q: int) -> GradedOperator:
    """Extend a grade-p → grade-1 operation to grade q by signed insertion."""
    if core.target_grade != 1:
        raise GradeError("only operations into single forms can be lifted")
    M = core.complex
    p = core.source_grade
    if q < p:
        return GradedOperator.zero(M, q, 1, core.degree)
    S = M.size
    total = None
    for j in range(q - p + 1):
        sign = -1 if (q - 1 + (j + 1) * (p + 1)) % 2 else 1
        term = sp.kron(_prefix_signs(M, j, p), core.num, format="csr")
        rest = q - p - j
        if rest:
            term = sp.kron(term, sp.identity(S**rest, dtype=np.int64, format="csr"), format="csr")
        term = term * sign
        total = term if total is None else total + term
    return GradedOperator(M, q, q - p + 1, total, core.den, core.degree)


def stokes_pairing(sigma: Sequence[int], omega: Chain) -> Fraction:
    """Value of the cochain dual to ``omega`` on σ."""
    if omega.grade != 1:
        raise GradeError("pairing is defined for single forms")
    return omega.coefficient(tuple(sigma))
