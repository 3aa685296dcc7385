"""Ordered simplicial complexes augmented with the empty simplex."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

Simplex = tuple[int, ...]
EMPTY: Simplex = ()


class ComplexError(ValueError):
    """Malformed complex input or a query outside the complex."""


class _Absent:
    """Marker for tuples that have no common containing simplex."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Absent"

    def __bool__(self) -> bool:
        return False


ABSENT = _Absent()


def canonical(vertices: Iterable[int]) -> Simplex:
    vs = list(vertices)
    for v in vs:
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
            raise ComplexError(f"vertex ids must be positive integers, got {v!r}")
    if len(set(vs)) != len(vs):
        raise ComplexError(f"duplicate vertex in simplex {vs}")
    return tuple(sorted(int(v) for v in vs))


def dim(sigma: Simplex) -> int:
    return len(sigma) - 1


def simplex_key(sigma: Simplex) -> tuple[int, Simplex]:
    """Basis order: by dimension, then lexicographically (∅ first)."""
    return (len(sigma), sigma)


@dataclass(frozen=True)
class OrderedComplex:
    simplexes: tuple[Simplex, ...]
    index: dict = field(init=False, repr=False, compare=False)
    vertices: tuple[int, ...] = field(init=False, repr=False, compare=False)
    masks: np.ndarray = field(init=False, repr=False, compare=False)
    degrees: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        simp = tuple(sorted(set(self.simplexes), key=simplex_key))
        if not simp or simp[0] != EMPTY:
            simp = (EMPTY,) + simp
        present = set(simp)
        for s in simp:
            for r in range(len(s)):
                for face in combinations(s, r):
                    if face not in present:
                        raise ComplexError(f"{face} is a face of {s} but not a member")
        verts = tuple(sorted({v for s in simp for v in s}))
        if len(verts) > 62:
            raise ComplexError("at most 62 vertices are supported")
        bit = {v: 1 << i for i, v in enumerate(verts)}
        masks = np.array([sum(bit[v] for v in s) for s in simp], dtype=np.int64)
        object.__setattr__(self, "simplexes", simp)
        object.__setattr__(self, "index", {s: i for i, s in enumerate(simp)})
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "degrees", np.array([len(s) - 1 for s in simp], dtype=np.int64))

    def __len__(self) -> int:
        return len(self.simplexes)

    def __iter__(self):
        return iter(self.simplexes)

    def __contains__(self, sigma) -> bool:
        return tuple(sigma) in self.index

    def __hash__(self) -> int:
        return hash(self.simplexes)

    @property
    def size(self) -> int:
        return len(self.simplexes)

    def index_of(self, sigma: Sequence[int]) -> int:
        try:
            return self.index[tuple(sigma)]
        except KeyError:
            raise ComplexError(f"{tuple(sigma)} is not a member of the complex") from None

    def mask_of(self, sigma: Sequence[int]) -> int:
        bit = {v: i for i, v in enumerate(self.vertices)}
        return sum(1 << bit[v] for v in sigma)

    def simplex_of_mask(self, mask: int) -> Simplex:
        return tuple(v for i, v in enumerate(self.vertices) if mask >> i & 1)

    def require(self, sigma: Sequence[int]) -> Simplex:
        s = tuple(sigma)
        if s not in self.index:
            raise ComplexError(f"{s} is not a member of the complex")
        return s

    def maximal(self) -> list[Simplex]:
        out = []
        for s in self.simplexes:
            if not any(len(t) > len(s) and set(s) <= set(t) for t in self.simplexes):
                out.append(s)
        return [s for s in out if s]

    def counts_by_dim(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for s in self.simplexes:
            out[dim(s)] = out.get(dim(s), 0) + 1
        return out

    def summary(self) -> str:
        parts = []
        for dm, c in sorted(self.counts_by_dim().items()):
            parts.append(f"{c}×∅" if dm == -1 else f"{c}×{dm}d")
        return f"{self.size} simplexes: " + ", ".join(parts)

    def is_closed_simplex(self) -> bool:
        return len(self.simplexes) == 2 ** len(self.vertices)

    def to_json(self) -> dict:
        return {"maximal": [list(s) for s in self.maximal()]}


def close_downward(maximal: Iterable[Iterable[int]]) -> OrderedComplex:
    faces: set[Simplex] = {EMPTY}
    for raw in maximal:
        s = canonical(raw)
        for r in range(len(s) + 1):
            faces.update(combinations(s, r))
    return OrderedComplex(tuple(faces))


def load_complex(path: str | Path) -> OrderedComplex:
    text = Path(path).read_text()
    if not text.strip():
        raise ComplexError(f"{path} is empty")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ComplexError(f"{path} is not valid JSON: {exc.msg} at line {exc.lineno}") from exc
    if not isinstance(data, dict) or "maximal" not in data:
        raise ComplexError('complex file must be a JSON object with a "maximal" list')
    return close_downward(data["maximal"])


def ord_embed(x: int, sigma: Sequence[int]) -> int:
    if x not in sigma:
        raise ComplexError(f"vertex {x} is not in {tuple(sigma)}")
    return sum(1 for y in sigma if y <= x)


def parity_beta(sub: Sequence[int], sigma: Sequence[int]) -> int:
    if not set(sub) <= set(sigma):
        raise ComplexError(f"{tuple(sub)} is not a subset of {tuple(sigma)}")
    return -1 if sum(ord_embed(x, sigma) for x in sub) % 2 else 1


def envelope(simplexes: Sequence[Sequence[int]], M: OrderedComplex):
    """Smallest member containing every input, or ABSENT."""
    union: set[int] = set()
    for s in simplexes:
        M.require(s)
        union.update(s)
    u = tuple(sorted(union))
    # downward closure makes the union the unique candidate
    return u if u in M else ABSENT


@dataclass(frozen=True)
class FreeInfo:
    envelope: Simplex
    free: frozenset[int]
    n: int
    k: int


def free_set(simplexes: Sequence[Sequence[int]], M: OrderedComplex) -> FreeInfo:
    env = envelope(simplexes, M)
    if env is ABSENT:
        raise ComplexError(f"tuple {tuple(map(tuple, simplexes))} has no envelope")
    count: dict[int, int] = {}
    for s in simplexes:
        for v in s:
            count[v] = count.get(v, 0) + 1
    tau = frozenset(v for v in env if count[v] == 1)
    return FreeInfo(env, tau, len(env), len(tau))


# catalogue of the complexes used throughout the tests

def closed_simplex(n_vertices: int) -> OrderedComplex:
    return close_downward([range(1, n_vertices + 1)])


def simplex_boundary(n_vertices: int) -> OrderedComplex:
    top = tuple(range(1, n_vertices + 1))
    return close_downward(combinations(top, n_vertices - 1))


def star_complex() -> OrderedComplex:
    return close_downward([(1, 2), (2, 3), (2, 4)])


CATALOGUE = {
    "1-simplex": lambda: closed_simplex(2),
    "2-disc": lambda: closed_simplex(3),
    "3-simplex": lambda: closed_simplex(4),
    "star": star_complex,
    "sphere": lambda: simplex_boundary(4),
}
