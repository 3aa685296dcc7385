"""The tower of operations m^(p) built by the K-operator recursion."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import gcd
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import sympy
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from .calculus import d_operator, del_operator, lift, wedge_operator
from .chains import INT_LIMIT, Chain, GradedOperator, exact_matmul, tuple_space
from .complex import OrderedComplex, closed_simplex, dim
from .locality import laplacian, localize, local_K, lifted_del, lifted_d
from .report import CheckResult, tuple_label

FLAVORS = ("naive-left", "naive-right", "local")


class TopologyError(ValueError):
    """Δ is singular, so the global K-operator does not exist."""


class ContractError(ValueError):
    """A construction was asked for something it does not provide."""


def associator(a: Sequence[int], b: Sequence[int], c: Sequence[int], M: OrderedComplex) -> Chain:
    w = wedge_operator(M)
    return (w @ lift(w, 3)).column((a, b, c))


# ------------------------------------------------------------- global K

def _fraction_matrix(op: GradedOperator) -> list[list[Fraction]]:
    n = op.num.shape[0]
    return op.dense(range(n), range(n))


@lru_cache(maxsize=32)
def global_laplacian_inverse(M: OrderedComplex) -> GradedOperator:
    """Δ⁻¹ on single forms, or TopologyError naming the singular degree."""
    D = laplacian(M, 1)
    dense = D.num.toarray()
    inv = np.zeros(dense.shape, dtype=object)
    for deg in sorted(set(int(x) for x in M.degrees)):
        idx = np.nonzero(M.degrees == deg)[0]
        blk = DomainMatrix([[QQ(int(dense[i, j])) for j in idx] for i in idx], (len(idx), len(idx)), QQ)
        if blk.det() == 0:
            raise TopologyError(f"Δ is singular on {deg}-forms (harmonic forms present)")
        binv = blk.inv().to_Matrix()
        for a, i in enumerate(idx):
            for b, j in enumerate(idx):
                inv[i, j] = Fraction(int(binv[a, b].p), int(binv[a, b].q)) / D.den
    den = 1
    for v in inv.ravel():
        if v:
            den = den * v.denominator // gcd(den, v.denominator)
    num = np.array([[int(v * den) for v in row] for row in inv], dtype=np.int64)
    return GradedOperator(M, 1, 1, sp.csr_matrix(num), den, 0)


def K_global(M: OrderedComplex) -> GradedOperator:
    """K = ∂Δ⁻¹ on single forms."""
    K = del_operator(M) @ global_laplacian_inverse(M)
    return GradedOperator(M, 1, 1, K.num, K.den, -1)


@dataclass(frozen=True)
class _Spectrum:
    scalar: Fraction | None
    projectors: tuple[tuple[Fraction, np.ndarray, int], ...] | None


@lru_cache(maxsize=32)
def _form_spectrum(M: OrderedComplex) -> _Spectrum:
    D = laplacian(M, 1)
    dense = D.num.toarray()
    diag = np.diag(dense)
    if not np.count_nonzero(dense - np.diag(diag)) and (diag == diag[0]).all():
        if diag[0] == 0:
            raise TopologyError("Δ vanishes")
        return _Spectrum(Fraction(int(diag[0]), D.den), None)
    eig = sympy.Matrix(dense.tolist()).eigenvals()
    if not all(ev.is_rational for ev in eig):
        return _Spectrum(None, None)
    if any(ev == 0 for ev in eig):
        raise TopologyError("Δ has a kernel (harmonic forms present)")
    vals = [Fraction(int(ev.p), int(ev.q)) for ev in eig]
    projs = []
    eye = np.eye(dense.shape[0], dtype=object)
    A = dense.astype(object)
    for lam in vals:
        P = eye.copy()
        for mu in vals:
            if mu != lam:
                P = np.dot(A - eye * mu * D.den, P) * Fraction(1, 1) / ((lam - mu) * D.den)
        den = 1
        for v in P.ravel():
            v = Fraction(v)
            den = den * v.denominator // gcd(den, v.denominator)
        projs.append((lam / D.den, np.array([[int(Fraction(v) * den) for v in r] for r in P],
                                            dtype=np.int64), den))
    return _Spectrum(None, tuple(projs))


@lru_cache(maxsize=32)
def fock_laplacian_inverse(M: OrderedComplex, p: int) -> GradedOperator | None:
    """Δ_lift⁻¹ on grade p as Σ over eigenvalue tuples of (1/Σλ)·P_λ1⊗…⊗P_λp."""
    spec = _form_spectrum(M)
    S = M.size
    if spec.scalar is not None:
        return GradedOperator.identity(M, p).scale(1 / (p * spec.scalar))
    if spec.projectors is None:
        return None
    pd = 1
    for _, _, den in spec.projectors:
        pd = pd * den // gcd(pd, den)
    mats = [(lam, sp.csr_matrix(P * (pd // den))) for lam, P, den in spec.projectors]
    totals = {}
    for combo in product(range(len(mats)), repeat=p):
        totals.setdefault(sum((mats[i][0] for i in combo), Fraction(0)), []).append(combo)
    L = 1
    for t in totals:
        L = L * t.numerator // gcd(L, t.numerator)
    acc = sp.csr_matrix((S**p, S**p), dtype=np.int64)
    for t, combos in totals.items():
        w = L // t.numerator * t.denominator
        for combo in combos:
            term = mats[combo[0]][1]
            for i in combo[1:]:
                term = sp.kron(term, mats[i][1], format="csr")
            acc = acc + term * w
    if acc.nnz and int(np.abs(acc.data).max()) >= INT_LIMIT // 4:
        raise OverflowError("Fock inverse coefficients exceed int64 range")
    return GradedOperator(M, p, p, acc, L * pd**p, 0)


def _apply_fock_inverse(X: GradedOperator, p: int) -> GradedOperator:
    """X ∘ Δ_lift⁻¹ where Δ_lift = Σ_j 1⊗…⊗Δ⊗…⊗1 on grade p."""
    inv = fock_laplacian_inverse(X.complex, p)
    if inv is None:
        return _solve_fock_inverse(X, p)
    Y = X @ inv
    return GradedOperator(X.complex, p, X.target_grade, Y.num, Y.den, X.degree)


def _solve_fock_inverse(X: GradedOperator, p: int) -> GradedOperator:
    """Exact solve of Δ_lift Yᵀ = Xᵀ per degree-signature block."""
    M = X.complex
    L = laplacian(M, p)
    space = tuple_space(M, p)
    digits = space.digits(np.arange(space.size))
    sig = M.degrees[digits]
    _, groups = np.unique(sig, axis=0, return_inverse=True)
    dense_L = L.num.tocsr()
    Xt = X.num.T.tocsr()
    out = np.zeros((X.num.shape[0], space.size), dtype=object)
    for g in np.unique(groups):
        idx = np.nonzero(groups.ravel() == g)[0]
        rhs = Xt[idx].toarray()
        if not rhs.any():
            continue
        A = dense_L[idx][:, idx].toarray()
        Adm = DomainMatrix([[QQ(int(v)) for v in r] for r in A], A.shape, QQ)
        Bdm = DomainMatrix([[QQ(int(v)) for v in r] for r in rhs], rhs.shape, QQ)
        sol = Adm.lu_solve(Bdm).to_Matrix()
        for a, i in enumerate(idx):
            for b in range(rhs.shape[1]):
                v = sol[a, b]
                if v:
                    out[b, i] = Fraction(int(v.p), int(v.q)) * L.den
    den = 1
    for v in out.ravel():
        if v:
            den = den * Fraction(v).denominator // gcd(den, Fraction(v).denominator)
    num = np.array([[int(Fraction(v) * den) for v in r] for r in out], dtype=np.int64)
    return GradedOperator(M, p, X.target_grade, sp.csr_matrix(num), X.den * den, X.degree)


def fock_K(M: OrderedComplex, p: int) -> GradedOperator:
    """Global K = ∂_lift Δ_lift⁻¹ on grade p."""
    K = _apply_fock_inverse(lifted_del(M, p), p)
    return GradedOperator(M, p, p, K.num, K.den, -1)


# ----------------------------------------------------------------- tower

@dataclass
class AInftyTower:
    complex: OrderedComplex
    p_max: int
    flavor: str
    cores: dict[int, GradedOperator]
    _lifts: dict = field(default_factory=dict, repr=False)

    def m(self, p: int) -> GradedOperator:
        return self.cores[p]

    def lifted(self, p: int, q: int) -> GradedOperator:
        key = (p, q)
        if key not in self._lifts:
            self._lifts[key] = lift(self.cores[p], q)
        return self._lifts[key]

    def __call__(self, *slots: Sequence[int]) -> Chain:
        return self.cores[len(slots)].column(slots)

    def K(self, q: int) -> GradedOperator:
        if self.flavor == "local":
            return local_K(self.complex, q)
        return fock_K(self.complex, q)


def _rhs(cores: dict[int, GradedOperator], lifts: dict, p: int) -> GradedOperator:
    M = cores[1].complex
    total = GradedOperator.zero(M, p, 1, 3 - p)
    for q in range(2, p):
        inner = lifts.get((p + 1 - q, p))
        if inner is None:
            inner = lifts[(p + 1 - q, p)] = lift(cores[p + 1 - q], p)
        total = total - cores[q] @ inner
    return GradedOperator(M, p, 1, total.num, total.den, 3 - p)


def rhs(tower: AInftyTower, p: int) -> GradedOperator:
    """𝓜^(p) = −Σ_{q=2}^{p−1} m^(q) ∘ m^(p+1−q)."""
    if p < 3:
        return GradedOperator.zero(tower.complex, p, 1, 3 - p)
    return _rhs(tower.cores, tower._lifts, p)


def build_tower(M: OrderedComplex, p_max: int, flavor: str = "local") -> AInftyTower:
    if flavor not in FLAVORS:
        raise ValueError(f"flavor must be one of {FLAVORS}")
    if p_max < 1:
        raise ValueError("p_max must be ≥ 1")
    cores = {1: d_operator(M)}
    if p_max >= 2:
        cores[2] = wedge_operator(M)
    lifts: dict = {}
    K1 = K_global(M) if flavor != "local" else None
    for p in range(3, p_max + 1):
        R = _rhs(cores, lifts, p)
        if flavor == "local":
            m = R @ local_K(M, p)
        elif flavor == "naive-right":
            m = _apply_fock_inverse(R @ lifted_del(M, p), p)
        else:
            m = K1 @ R
        cores[p] = GradedOperator(M, p, 1, m.num, m.den, 2 - p)
    return AInftyTower(M, p_max, flavor, cores, lifts)


def build_local(M: OrderedComplex, p_max: int) -> AInftyTower:
    return build_tower(M, p_max, "local")


def build_naive(M: OrderedComplex, p_max: int, side: str = "right") -> AInftyTower:
    if side not in ("left", "right"):
        raise ValueError("side must be left or right")
    return build_tower(M, p_max, f"naive-{side}")


def closed_form(tower: AInftyTower, p: int) -> GradedOperator:
    """(−1)^p ∧(∧K)^{p−2} with the tower's K on each grade."""
    M = tower.complex
    w = wedge_operator(M)
    if p == 2:
        return w
    op = GradedOperator.identity(M, p)
    for q in range(p, 2, -1):
        op = lift(w, q) @ tower.K(q) @ op
    op = w @ op
    return op.scale((-1) ** p)


# ------------------------------------------------------------- checks

def _sum_of_products(pairs, cols: np.ndarray | None) -> tuple[sp.csr_matrix, int]:
    acc, acc_den = None, 1
    for A, B in pairs:
        right = B.num if cols is None else B.num[:, cols]
        prod_ = exact_matmul(A.num, right.tocsr())
        den = A.den * B.den
        if acc is None:
            acc, acc_den = prod_, den
        else:
            L = acc_den * den // gcd(acc_den, den)
            acc = acc * (L // acc_den) + prod_ * (L // den)
            acc_den = L
    acc = acc.tocsr()
    acc.eliminate_zeros()
    return acc, acc_den


def _failing(mat: sp.csr_matrix, cols: np.ndarray | None) -> np.ndarray:
    bad = np.nonzero(np.diff(mat.tocsc().indptr))[0]
    return bad if cols is None else cols[bad]


def _domain(M: OrderedComplex, q: int, forms_only: bool) -> np.ndarray:
    space = tuple_space(M, q)
    return space.forms_only() if forms_only else np.arange(space.size)


def verify_relation(tower: AInftyTower, n: int, q: int, forms_only: bool = True) -> CheckResult:
    """Σ_{k+l=n+1} m^(k)∘m^(l) on grade-q tuples."""
    M = tower.complex
    pairs = []
    for k in range(1, n + 1):
        l = n + 1 - k
        if l > q or k > q - l + 1 or k > tower.p_max or l > tower.p_max:
            continue
        pairs.append((tower.lifted(k, q - l + 1), tower.lifted(l, q)))
    cols = _domain(M, q, forms_only)
    name = f"relation n={n}" + ("" if forms_only else " (with ∅ slots)")
    if not pairs:
        return CheckResult(name, q, int(cols.size), True)
    mat, _ = _sum_of_products(pairs, cols)
    bad = _failing(mat, cols)
    ce = tuple_label(tuple_space(M, q).decode(int(bad[0]))) if bad.size else None
    return CheckResult(name, q, int(cols.size), not bad.size, ce, int(bad.size))


def verify_all_relations(tower: AInftyTower, n_max: int | None = None, q_max: int | None = None,
                         forms_only: bool = True) -> list[CheckResult]:
    n_max = n_max or tower.p_max
    q_max = q_max or tower.p_max
    return [verify_relation(tower, n, q, forms_only)
            for n in range(1, n_max + 1) for q in range(n, q_max + 1)]


def verify_consistency(tower: AInftyTower, p: int, forms_only: bool = True) -> CheckResult:
    """d∘𝓜^(p) = 𝓜^(p)∘d on grade-p tuples."""
    M = tower.complex
    R = rhs(tower, p)
    d = d_operator(M)
    cols = _domain(M, p, forms_only)
    mat, _ = _sum_of_products([(d, R), (R.scale(-1), lifted_d(M, p))], cols)
    bad = _failing(mat, cols)
    ce = tuple_label(tuple_space(M, p).decode(int(bad[0]))) if bad.size else None
    return CheckResult("consistency dM=Md", p, int(cols.size), not bad.size, ce, int(bad.size))


def verify_degrees(tower: AInftyTower) -> CheckResult:
    M = tower.complex
    bad = 0
    for p, op in tower.cores.items():
        space = tuple_space(M, p)
        coo = op.num.tocoo()
        src_deg = M.degrees[space.digits(coo.col.astype(np.int64))].sum(axis=1)
        bad += int(np.count_nonzero(M.degrees[coo.row] != src_deg + 2 - p))
    return CheckResult("degree 2-p", tower.p_max, len(tower.cores), bad == 0, None, bad)


def verify_strict_locality(tower: AInftyTower) -> CheckResult:
    bad = 0
    ce = None
    for p in range(3, tower.p_max + 1):
        parts = localize(tower.cores[p])
        for part in (parts.raising, parts.lowering):
            cols = part.failing_columns()
            if cols.size and ce is None:
                ce = tuple_label(tuple_space(tower.complex, p).decode(int(cols[0])))
            bad += int(cols.size)
    return CheckResult("strict locality", tower.p_max, len(tower.cores), bad == 0, ce, bad)


def verify_epsilon_cancellation(M: OrderedComplex, tower: AInftyTower, p: int,
                                forms_only: bool = True) -> CheckResult:
    """𝓜^(p)∘ε = 0 with ε = d₋[K] + [K]d₋."""
    from .locality import epsilon

    cols = _domain(M, p, forms_only)
    mat, _ = _sum_of_products([(rhs(tower, p), epsilon(M, p))], cols)
    bad = _failing(mat, cols)
    ce = tuple_label(tuple_space(M, p).decode(int(bad[0]))) if bad.size else None
    return CheckResult("M∘eps=0", p, int(cols.size), not bad.size, ce, int(bad.size))


# ----------------------------------------------------------- conjugation

@dataclass
class Conjugation:
    tower: AInftyTower
    grade_max: int
    steps: dict[int, GradedOperator]
    _D: dict = field(default_factory=dict, repr=False)

    def U(self, q: int, r: int) -> GradedOperator:
        """Component grade q → r of U = 1 + ∧K."""
        M = self.tower.complex
        if r == q:
            return GradedOperator.identity(M, q)
        if r == q - 1:
            return self.steps[q]
        return GradedOperator.zero(M, q, r)

    def U_inv(self, q: int, r: int) -> GradedOperator:
        """Component of the Neumann series Σ (−∧K)^j."""
        M = self.tower.complex
        op = GradedOperator.identity(M, q)
        for s in range(q, r, -1):
            op = self.steps[s] @ op
        return op.scale((-1) ** (q - r))

    def D(self, q: int, r: int) -> GradedOperator:
        if (q, r) not in self._D:
            self._D[(q, r)] = self._component(q, r)
        return self._D[(q, r)]

    def _component(self, q: int, r: int) -> GradedOperator:
        M = self.tower.complex
        total = GradedOperator.zero(M, q, r)
        for s in range(r, q + 1):
            mid = lifted_d(M, s) @ self.U_inv(q, s)
            if s == r:
                total = total + mid
            elif s == r + 1:
                total = total + self.steps[s] @ mid
        return total


def conjugator(tower: AInftyTower, grade_max: int | None = None) -> Conjugation:
    if tower.flavor == "naive-left":
        raise ContractError("the left-handed tower is not a conjugation of d")
    grade_max = grade_max or tower.p_max
    M = tower.complex
    w = wedge_operator(M)
    steps = {}
    for q in range(2, grade_max + 1):
        K = tower.K(q)
        if not (K @ K).is_zero():
            raise ContractError(f"K² ≠ 0 on grade {q}")
        steps[q] = lift(w, q) @ K
    return Conjugation(tower, grade_max, steps)


def verify_components(conj: Conjugation, forms_only: bool = True) -> list[CheckResult]:
    """Grade q → r component of D against the lifted m^(q−r+1)."""
    M = conj.tower.complex
    out = []
    for q in range(1, conj.grade_max + 1):
        cols = _domain(M, q, forms_only)
        for r in range(1, q + 1):
            p = q - r + 1
            diff = conj.D(q, r) - conj.tower.lifted(p, q)
            bad = diff.failing_columns(cols)
            ce = tuple_label(tuple_space(M, q).decode(int(bad[0]))) if bad.size else None
            out.append(CheckResult(f"D component {q}->{r} = m({p})", q, int(cols.size),
                                   not bad.size, ce, int(bad.size)))
    return out


def verify_nilpotent(conj: Conjugation) -> list[CheckResult]:
    """D² = 0 on every grade ≤ grade_max, all basis tuples."""
    M = conj.tower.complex
    out = []
    for q in range(1, conj.grade_max + 1):
        bad_total, ce = 0, None
        for r in range(1, q + 1):
            mat, _ = _sum_of_products([(conj.D(s, r), conj.D(q, s)) for s in range(r, q + 1)], None)
            bad = _failing(mat, None)
            if bad.size and ce is None:
                ce = tuple_label(tuple_space(M, q).decode(int(bad[0])))
            bad_total += int(bad.size)
        out.append(CheckResult("D^2=0", q, M.size**q, bad_total == 0, ce, bad_total))
    return out


def verify_conjugation(conj: Conjugation, forms_only: bool = True) -> list[CheckResult]:
    return verify_components(conj, forms_only) + verify_nilpotent(conj)


# --------------------------------------------------------- formula tables

LETTERS = "ijklpqrstuvw"
SLOT_NAMES = "abcdefgh"
OPERATIONS = {"wedge": 2, "assoc": 3, "m3": 3, "m4": 4}


@dataclass
class FormulaTable:
    operation: str
    signature: tuple[int, ...]
    terms: list[tuple[Fraction, str]]

    def as_dict(self) -> dict[str, Fraction]:
        return {mono: c for c, mono in self.terms}

    def render(self) -> str:
        head = f"{self.operation}{self.signature}"
        if not self.terms:
            return f"{head} = 0"
        parts = []
        for c, mono in self.terms:
            sign = "-" if c < 0 else "+"
            parts.append(f"{sign} {abs(c.numerator)}/{c.denominator}·{mono}")
        body = " ".join(parts)
        return f"{head} = " + (body[2:] if body.startswith("+") else "-" + body[2:])


def monomial(tup) -> str:
    """Generic-label monomial such as a(i,j)b(j,k)c(i,k)."""
    return "".join(f"{SLOT_NAMES[i]}({','.join(LETTERS[v - 1] for v in s)})"
                   for i, s in enumerate(tup))


def _operation(M: OrderedComplex, operation: str, p: int, flavor: str) -> GradedOperator:
    w = wedge_operator(M)
    if operation == "wedge":
        return w
    if operation == "assoc":
        return w @ lift(w, 3)
    return build_tower(M, p, flavor).cores[p]


def _table_on(N: int, operation: str, signature: tuple[int, ...], flavor: str) -> FormulaTable:
    p = len(signature)
    out_deg = sum(signature) + (0 if operation in ("wedge", "assoc") else 2 - p)
    M = closed_simplex(N)
    op = _operation(M, operation, p, flavor)
    row = M.index_of(tuple(range(1, out_deg + 2)))
    space = tuple_space(M, p)
    coo = op.num[row].tocoo()
    terms = []
    for c, v in zip(coo.col, coo.data):
        t = space.decode(int(c))
        if tuple(dim(s) for s in t) == signature:
            terms.append((Fraction(int(v), op.den), monomial(t)))
    terms.sort(key=lambda x: x[1])
    return FormulaTable(operation, signature, terms)


def formula_table(operation: str, signature: Sequence[int], N: int | None = None,
                  flavor: str = "local", recheck: bool = True) -> FormulaTable:
    """Coefficient table of an operation on the output simplex of a closed simplex."""
    if operation not in OPERATIONS:
        raise ValueError(f"operation must be one of {sorted(OPERATIONS)}")
    signature = tuple(int(x) for x in signature)
    if len(signature) != OPERATIONS[operation]:
        raise ValueError(f"{operation} takes {OPERATIONS[operation]} arguments")
    if min(signature) < 0:
        raise ValueError("degrees must be non-negative")
    p = len(signature)
    out_deg = sum(signature) + (0 if operation in ("wedge", "assoc") else 2 - p)
    if out_deg < 0:
        raise ValueError("signature gives a negative output degree")
    need = out_deg + 1
    if N is None:
        N = need
    if N < need or max(signature) + 1 > N:
        raise ValueError(f"signature {signature} needs at least {need} vertices")
    table = _table_on(N, operation, signature, flavor)
    if recheck:
        other = _table_on(N + 1, operation, signature, flavor)
        if other.terms != table.terms:
            raise ContractError(f"{operation}{signature} table changes between {N} and {N + 1} vertices")
    return table


# -------------------------------------------------- locality by embedding

def compare_embedded(small: AInftyTower, big: AInftyTower, p: int, forms_only: bool = True) -> CheckResult:
    """m^(p) on tuples of the smaller complex, computed in both complexes."""
    S, B = small.complex, big.complex
    missing = [s for s in S.simplexes if s not in B]
    if missing:
        raise ContractError(f"{missing[0]} is not a simplex of the larger complex")
    space = tuple_space(S, p)
    cols = _domain(S, p, forms_only)
    bad, ce = 0, None
    for c in cols:
        tup = space.decode(int(c))
        if small.cores[p].column(tup) != big.cores[p].column(tup):
            bad += 1
            ce = ce or tuple_label(tup)
    return CheckResult(f"embedding {small.flavor} m({p})", p, int(cols.size), bad == 0, ce, bad)
