"""Localization of operators, the local Laplacian and its two inverses."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import comb, factorial, gcd, prod
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .calculus import d_operator, del_operator, lift
from .chains import Chain, GradedOperator, INT_LIMIT, exact_matmul, tuple_space
from .complex import OrderedComplex, Simplex, free_set
from .report import CheckResult, tuple_label


class LocalityError(ValueError):
    """An operator entry relates two incomparable envelopes."""


class OracleMismatch(AssertionError):
    """The combinatorial and polynomial inverses disagree."""


@dataclass(frozen=True)
class LocalityParts:
    strict: GradedOperator
    raising: GradedOperator
    lowering: GradedOperator

    def total(self) -> GradedOperator:
        return self.strict + self.raising + self.lowering


def localize(op: GradedOperator) -> LocalityParts:
    M = op.complex
    src = tuple_space(M, op.source_grade)
    tgt = tuple_space(M, op.target_grade)
    coo = op.num.tocoo()
    r, c = coo.row.astype(np.int64), coo.col.astype(np.int64)
    kind = _kernels.classify(src.union[c], src.absent[c], tgt.union[r], tgt.absent[r])
    if (kind == _kernels.INCOMPARABLE).any():
        i = int(np.nonzero(kind == _kernels.INCOMPARABLE)[0][0])
        raise LocalityError(f"entry {src.decode(int(c[i]))} → {tgt.decode(int(r[i]))} "
                            "has incomparable envelopes")
    parts = []
    for code in (_kernels.STRICT, _kernels.RAISING, _kernels.LOWERING):
        sel = kind == code
        num = sp.csr_matrix((coo.data[sel], (r[sel], c[sel])), shape=op.num.shape, dtype=np.int64)
        parts.append(GradedOperator(M, op.source_grade, op.target_grade, num, op.den, op.degree))
    return LocalityParts(*parts)


# ------------------------------------------------------------ Laplacians

@lru_cache(maxsize=64)
def lifted_d(M: OrderedComplex, p: int) -> GradedOperator:
    return lift(d_operator(M), p)


@lru_cache(maxsize=64)
def lifted_del(M: OrderedComplex, p: int) -> GradedOperator:
    return lift(del_operator(M), p)


@lru_cache(maxsize=64)
def local_parts_d(M: OrderedComplex, p: int) -> LocalityParts:
    return localize(lifted_d(M, p))


@lru_cache(maxsize=64)
def local_parts_del(M: OrderedComplex, p: int) -> LocalityParts:
    return localize(lifted_del(M, p))


def laplacian(M: OrderedComplex, p: int = 1) -> GradedOperator:
    d, dl = lifted_d(M, p), lifted_del(M, p)
    return d @ dl + dl @ d


@lru_cache(maxsize=64)
def laplacian_local(M: OrderedComplex, p: int) -> GradedOperator:
    d, dl = local_parts_d(M, p).strict, local_parts_del(M, p).strict
    return d @ dl + dl @ d


# ----------------------------------------------------------------- cells

@dataclass(frozen=True)
class Cell:
    """Tuples sharing envelope, free set and the slots of every non-free vertex."""

    envelope: Simplex
    free: Simplex
    n: int
    k: int
    indices: np.ndarray


@lru_cache(maxsize=32)
def cells(M: OrderedComplex, p: int) -> tuple[Cell, ...]:
    space = tuple_space(M, p)
    live = np.nonzero(~space.absent)[0]
    place = _kernels.placement(M.masks, p, len(M.vertices), space.union, space.once)
    key = np.column_stack([space.union[live], space.once[live], place[live]])
    _, inverse = np.unique(key, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(inverse, kind="stable")
    bounds = np.flatnonzero(np.diff(inverse[order])) + 1
    out = []
    for grp in np.split(order, bounds):
        idx = live[grp]
        e = int(idx[0])
        env = M.simplex_of_mask(int(space.union[e]))
        tau = M.simplex_of_mask(int(space.once[e]))
        out.append(Cell(env, tau, len(env), len(tau), idx))
    return tuple(out)


# -------------------------------------------------------------- spectra

@dataclass(frozen=True)
class SpectralBlock:
    sigma: Simplex | None
    tau: Simplex | None
    n: int
    k: int
    p: int
    eigenvalues: tuple[int, ...]
    multiplicities: tuple[int, ...]

    def nonzero_eigenvalues(self) -> tuple[int, ...]:
        return tuple(v for v in self.eigenvalues if v)


def block_spectrum(n: int, k: int, p: int, sigma=None, tau=None) -> SpectralBlock:
    if not (0 <= k <= n and p >= 1):
        raise ValueError("need 0 ≤ k ≤ n and p ≥ 1")
    # m free points excited: eigenvalue p(n−k+m) with multiplicity C(k,m)(p−1)^m
    eig = tuple(p * (n - k + m) for m in range(k + 1))
    mult = tuple(comb(k, m) * (p - 1) ** m for m in range(k + 1))
    return SpectralBlock(sigma, tau, n, k, p, eig, mult)


def _inf_norm(A: np.ndarray) -> int:
    return int(np.abs(A).sum(axis=1).max()) if A.size else 0


def _int_matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if A.dtype == object or B.dtype == object:
        return np.dot(A.astype(object), B.astype(object))
    if _inf_norm(A) * int(np.abs(B).max(initial=0)) >= INT_LIMIT:
        return np.dot(A.astype(object), B.astype(object))
    return A @ B


def _rank_mod(A: np.ndarray, prime: int = 2_147_483_629) -> int:
    A = np.array([[int(x) % prime for x in row] for row in A], dtype=np.int64)
    rows, cols = A.shape
    rank = 0
    for c in range(cols):
        piv = np.nonzero(A[rank:, c])[0]
        if piv.size == 0:
            continue
        r = rank + int(piv[0])
        A[[rank, r]] = A[[r, rank]]
        inv = pow(int(A[rank, c]), -1, prime)
        A[rank] = (A[rank] * inv) % prime
        others = np.nonzero(A[:, c])[0]
        others = others[others != rank]
        if others.size:
            A[others] = (A[others] - (A[others, c][:, None] * A[rank][None, :]) % prime) % prime
        rank += 1
        if rank == rows:
            break
    return rank


@dataclass
class SpectrumCheck:
    cell: Cell
    annihilated: bool
    ranks: tuple[int, ...]
    expected: SpectralBlock

    @property
    def multiplicities_ok(self) -> bool:
        return self.ranks == self.expected.multiplicities


def check_cell_spectrum(M: OrderedComplex, p: int, cell: Cell) -> SpectrumCheck:
    """Annihilating polynomial and eigenspace ranks of Δ_loc on one cell.

    Ranks are taken mod a prime. Each mod-prime rank is at most the exact
    rank, and the exact ranks sum to the block size once the annihilating
    product vanishes, so matching sums certify the exact values.
    """
    L = laplacian_local(M, p)
    B = L.num[cell.indices][:, cell.indices].toarray()
    if L.den != 1:
        raise ValueError("Δ_loc is expected to be integral")
    expected_block = block_spectrum(cell.n, cell.k, p, cell.envelope, cell.free)
    eye = np.eye(B.shape[0], dtype=np.int64)
    factors = [B - lam * eye for lam in expected_block.eigenvalues]
    P = eye
    for f in factors:
        P = _int_matmul(f, P)
    annihilated = not np.any(P)
    ranks = []
    for i in range(len(factors)):
        Q = eye
        for j, f in enumerate(factors):
            if j != i:
                Q = _int_matmul(f, Q)
        ranks.append(_rank_mod(Q))
    if annihilated and sum(ranks) != B.shape[0]:
        raise ArithmeticError("mod-prime rank deficiency; retry with another prime")
    return SpectrumCheck(cell, annihilated, tuple(ranks), expected_block)


@dataclass
class BlockSpectrumCheck:
    sigma: Simplex
    tau: Simplex
    size: int
    n_cells: int
    annihilated: bool
    ranks: tuple[int, ...]
    expected: SpectralBlock

    @property
    def multiplicities_ok(self) -> bool:
        return self.ranks == tuple(self.n_cells * m for m in self.expected.multiplicities)


def spectrum_survey(M: OrderedComplex, p: int) -> list[BlockSpectrumCheck]:
    """Every nonempty (σ, τ) block: annihilating product on the block, ranks over its cells."""
    L = laplacian_local(M, p)
    groups: dict[tuple, list] = {}
    for c in cells(M, p):
        groups.setdefault((c.envelope, c.free), []).append(check_cell_spectrum(M, p, c))
    out = []
    for (sigma, tau), checks in sorted(groups.items()):
        idx = np.concatenate([chk.cell.indices for chk in checks])
        cols = L.num[:, idx]
        B = cols[idx]
        if abs(cols).sum() != abs(B).sum():
            raise ValueError(f"Δ_loc leaks out of the block {sigma}, {tau}")
        expected_block = checks[0].expected
        eye = sp.identity(B.shape[0], dtype=np.int64, format="csr")
        P = eye
        for lam in expected_block.eigenvalues:
            P = exact_matmul((B - eye * lam).tocsr(), P)
        P.eliminate_zeros()
        ranks = tuple(sum(r) for r in zip(*(chk.ranks for chk in checks)))
        out.append(BlockSpectrumCheck(sigma, tau, len(idx), len(checks), P.nnz == 0, ranks, expected_block))
    return out


# ------------------------------------------------- polynomial inversion

def _elementary_symmetric(values: Sequence[int]) -> list[int]:
    e = [1]
    for v in values:
        e = e + [0]
        for i in range(len(e) - 1, 0, -1):
            e[i] += v * e[i - 1]
    return e


def _poly_mul(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


@dataclass(frozen=True)
class VietaInverse:
    eigenvalues: tuple[int, ...]
    coefficients: tuple[Fraction, ...]

    def __call__(self, x: Fraction) -> Fraction:
        return sum((c * Fraction(x) ** i for i, c in enumerate(self.coefficients)), Fraction(0))


def vieta_inverse(eigenvalues: Sequence[int]) -> VietaInverse:
    """Polynomial f with f(λ) = 1/λ on nonzero eigenvalues and f(0) = 0."""
    distinct = sorted(set(eigenvalues))
    mu = [v for v in distinct if v]
    r = len(mu)
    if r == 0:
        return VietaInverse(tuple(distinct), (Fraction(0),))
    e = _elementary_symmetric(mu)
    # Π(x − μ) = Σ_t (−1)^{r−t} e_{r−t} x^t and the constant term gives 1/x
    lead = Fraction((-1) ** (r + 1) * e[r])
    coeffs = [Fraction((-1) ** (r - t) * e[r - t]) / lead for t in range(1, r + 1)]
    if 0 in distinct:
        # multiply by 1 − Π(1 − x/μ), the projector off the kernel
        proj = [Fraction(1)]
        for m in mu:
            proj = _poly_mul(proj, [Fraction(1), Fraction(-1, m)])
        off = [-c for c in proj]
        off[0] += 1
        coeffs = _poly_mul(coeffs, off)
    return VietaInverse(tuple(distinct), tuple(coeffs))


def apply_polynomial(B: np.ndarray, coeffs: Sequence[Fraction]) -> list[list[Fraction]]:
    den = 1
    for c in coeffs:
        den = den * c.denominator // gcd(den, c.denominator)
    acc = np.zeros(B.shape, dtype=object)
    power = np.eye(B.shape[0], dtype=np.int64)
    for i, c in enumerate(coeffs):
        if i:
            power = _int_matmul(B, power)
        acc = acc + power.astype(object) * int(c * den)
    return [[Fraction(int(v), den) for v in row] for row in acc]


def invert_local_laplacian_poly(block_matrix: np.ndarray, n: int, k: int, p: int) -> list[list[Fraction]]:
    expected_block = block_spectrum(n, k, p)
    return apply_polynomial(np.asarray(block_matrix, dtype=np.int64),
                            vieta_inverse(expected_block.eigenvalues).coefficients)


@lru_cache(maxsize=16)
def local_inverse_poly(M: OrderedComplex, p: int) -> GradedOperator:
    """Δ_loc pseudo-inverse assembled cell by cell from the Vieta polynomial."""
    L = laplacian_local(M, p)
    rows, cols, vals = [], [], []
    for cell in cells(M, p):
        idx = cell.indices
        B = L.num[idx][:, idx].toarray()
        inv = invert_local_laplacian_poly(B, cell.n, cell.k, p)
        for a, ra in enumerate(inv):
            for b, v in enumerate(ra):
                if v:
                    rows.append(int(idx[a]))
                    cols.append(int(idx[b]))
                    vals.append(v)
    return _fraction_operator(M, p, rows, cols, vals)


def _fraction_operator(M, p, rows, cols, vals) -> GradedOperator:
    den = 1
    for v in vals:
        den = den * v.denominator // gcd(den, v.denominator)
    data = np.array([int(v * den) for v in vals], dtype=np.int64)
    N = M.size**p
    num = sp.csr_matrix((data, (rows, cols)), shape=(N, N), dtype=np.int64)
    return GradedOperator(M, p, p, num, den, 0)


# -------------------------------------------- combinatorial inversion

def _rising(x: int, a: int) -> int:
    return prod(x + t for t in range(a))


@dataclass(frozen=True)
class RearrangementWeights:
    k: int
    n: int
    p: int
    F0: int
    table: dict[int, Fraction]

    def Q(self, a: int, b: int) -> int:
        return comb(b, a) * self.p**a * factorial(self.k - a)


def subset_sum_weight(k: int, n: int, p: int, j: int) -> Fraction:
    """Matrix element of Δ_loc⁺ between arrangements differing in j free points.

    Treats Δ_loc on a cell as p(n−k) plus one copy of p(1 − J/p) per free
    point, J the all-ones p×p matrix, and sums over excited subsets.
    """
    c = p * (n - k)
    q = Fraction(1, p)
    total = Fraction(0)
    for b1 in range(j + 1):
        for b2 in range(k - j + 1):
            lam = c + p * (b1 + b2)
            if lam == 0:
                continue
            amp = comb(j, b1) * comb(k - j, b2) * q ** (j - b1) * (-q) ** b1 \
                * q ** (k - j - b2) * (1 - q) ** b2
            total += amp / lam
    return total


@lru_cache(maxsize=256)
def rearrangement_weights(k: int, n: int, p: int) -> RearrangementWeights:
    """Weights F(k,n,j) indexed by j, the number of moved free points."""
    if not 0 <= k <= n:
        raise ValueError("need 0 ≤ k ≤ n")
    F0 = p ** (k + 1) * prod(n - t for t in range(k + 1))
    table = {}
    for j in range(k + 1):
        m = k - j
        if F0:
            top = sum(comb(m, a) * p**a * factorial(k - a) * _rising(n - k, a) for a in range(m + 1))
            table[j] = Fraction(top, F0)
        else:
            table[j] = subset_sum_weight(k, n, p, j)
    return RearrangementWeights(k, n, p, F0, table)


def _crossings(base: list[set], free: list[int], slots: Sequence[int]) -> int:
    """Parity of free points passing fixed symbols (slot boundaries and
    non-free vertices) plus the parity of the free-point permutation."""
    par = 0
    q = len(base)
    for t, (v, a) in enumerate(zip(free, slots)):
        par += sum(1 for x in base[a] if x > v)
        par += sum(1 + len(base[i]) for i in range(a + 1, q))
        par += sum(1 for u in range(t + 1, len(free)) if slots[u] < a)
    return par % 2


def invert_local_laplacian_comb(e: Sequence[Sequence[int]], M: OrderedComplex) -> Chain:
    e = tuple(M.require(tuple(s)) for s in e)
    info = free_set(e, M)
    p = len(e)
    free = sorted(info.free)
    home = [next(i for i, s in enumerate(e) if v in s) for v in free]
    base = [set(s) - info.free for s in e]
    weights = rearrangement_weights(info.k, info.n, p).table
    src = _crossings(base, free, home)
    out: dict = {}
    for slots in product(range(p), repeat=info.k):
        new = [set(b) for b in base]
        for v, a in zip(free, slots):
            new[a].add(v)
        moved = sum(1 for a, h in zip(slots, home) if a != h)
        sign = -1 if (src + _crossings(base, free, slots)) % 2 else 1
        key = tuple(tuple(sorted(s)) for s in new)
        out[key] = out.get(key, 0) + sign * weights[moved]
    return Chain(p, out)


@lru_cache(maxsize=16)
def _weight_array(nverts: int, p: int) -> tuple[np.ndarray, int]:
    entries = {}
    den = 1
    for n in range(nverts + 1):
        for k in range(n + 1):
            for j, w in rearrangement_weights(k, n, p).table.items():
                entries[(n, k, j)] = w
                den = den * w.denominator // gcd(den, w.denominator)
    arr = np.zeros((nverts + 1, nverts + 1, nverts + 1), dtype=np.int64)
    for (n, k, j), w in entries.items():
        arr[n, k, j] = int(w * den)
    return arr, den


@lru_cache(maxsize=16)
def local_inverse(M: OrderedComplex, p: int) -> GradedOperator:
    """Δ_loc pseudo-inverse from the rearrangement rule; zero on ABSENT tuples."""
    space = tuple_space(M, p)
    cols = np.nonzero(~space.absent)[0].astype(np.int64)
    order = np.argsort(M.masks, kind="stable")
    sorted_masks = M.masks[order]
    weights, den = _weight_array(len(M.vertices), p)
    n_of = space.n_vertices()
    rows, cc, vals = _kernels.rearrangement_inverse(
        cols, M.masks, p, space.union, space.once, sorted_masks, order.astype(np.int64),
        len(M.vertices), n_of, weights)
    N = space.size
    num = sp.csr_matrix((vals, (rows, cc)), shape=(N, N), dtype=np.int64)
    return GradedOperator(M, p, p, num, den, 0)


def compare_inverses(M: OrderedComplex, p: int) -> CheckResult:
    diff = local_inverse(M, p) - local_inverse_poly(M, p)
    bad = diff.failing_columns()
    ce = None
    if bad.size:
        ce = tuple_label(tuple_space(M, p).decode(int(bad[0])))
    return CheckResult("inverse-comb-vs-poly", p, M.size**p, not bad.size, ce, int(bad.size))


def checked_local_inverse(M: OrderedComplex, p: int) -> GradedOperator:
    res = compare_inverses(M, p)
    if not res.passed:
        raise OracleMismatch(f"combinatorial and polynomial inverses differ on {res.counterexample}")
    return local_inverse(M, p)


# ------------------------------------------------------------- local K

@lru_cache(maxsize=16)
def local_K(M: OrderedComplex, p: int) -> GradedOperator:
    if p < 2:
        return GradedOperator.zero(M, p, p, -1)
    K = local_parts_del(M, p).strict @ local_inverse(M, p)
    return GradedOperator(M, p, p, K.num, K.den, -1)


def epsilon(M: OrderedComplex, p: int) -> GradedOperator:
    dm = local_parts_d(M, p).lowering
    K = local_K(M, p)
    return dm @ K + K @ dm


def verify_plusminus(M: OrderedComplex, p: int) -> list[CheckResult]:
    space = tuple_space(M, p)
    dp = local_parts_d(M, p).raising
    dl = local_parts_del(M, p).strict
    dloc = local_parts_d(M, p).strict
    out = []
    for name, op in (("d+[del]+[del]d+", dp @ dl + dl @ dp), ("[d]^2", dloc @ dloc)):
        bad = op.failing_columns()
        ce = tuple_label(space.decode(int(bad[0]))) if bad.size else None
        out.append(CheckResult(name, p, space.size, not bad.size, ce, int(bad.size)))
    return out


def homotopy_on_cells(M: OrderedComplex, p: int) -> CheckResult:
    """[d][K] + [K][d] = 1 restricted to cells with k < n."""
    space = tuple_space(M, p)
    dloc = local_parts_d(M, p).strict
    K = local_K(M, p)
    H = dloc @ K + K @ dloc - GradedOperator.identity(M, p)
    cols = np.concatenate([c.indices for c in cells(M, p) if c.k < c.n] or [np.zeros(0, dtype=np.int64)])
    bad = H.failing_columns(cols)
    ce = tuple_label(space.decode(int(bad[0]))) if bad.size else None
    return CheckResult("[d][K]+[K][d]=1 (k<n)", p, int(cols.size), not bad.size, ce, int(bad.size))

