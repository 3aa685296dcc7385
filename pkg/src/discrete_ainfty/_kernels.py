"""Loops over S^q tuple bases.

Each kernel has a numba version and a pure-numpy version with identical
outputs. ``DISCRETE_AINFTY_BACKEND=numpy`` forces the numpy path; the
default is numba when it imports.
"""
from __future__ import annotations

import os
import warnings

import numpy as np

try:
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    nb = None
    HAVE_NUMBA = False

STRICT, RAISING, LOWERING, INCOMPARABLE = 0, 1, 2, 3


def _requested_backend() -> str:
    name = os.environ.get("DISCRETE_AINFTY_BACKEND", "numba").strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"DISCRETE_AINFTY_BACKEND must be numba or numpy, got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        warnings.warn("numba unavailable, using the numpy backend")
        return "numpy"
    return name


BACKEND = _requested_backend()


def set_backend(name: str) -> None:
    """Switch backend at runtime (used by the benchmark and tests)."""
    global BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(name)
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    BACKEND = name


def _njit(fn):
    if HAVE_NUMBA:
        return nb.njit(cache=True)(fn)
    return fn


# ---------------------------------------------------------------- popcount

@_njit
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


# ------------------------------------------------------------ tuple masks

@_njit
def _tuple_masks_nb(masks, q):
    S = masks.shape[0]
    total = S**q
    union = np.zeros(total, dtype=np.int64)
    once = np.zeros(total, dtype=np.int64)
    for idx in range(total):
        rem = idx
        u = np.int64(0)
        multi = np.int64(0)
        for _ in range(q):
            m = masks[rem % S]
            rem //= S
            multi |= u & m
            u |= m
        union[idx] = u
        once[idx] = u & ~multi
    return union, once


def _tuple_masks_np(masks, q):
    union = np.zeros(1, dtype=np.int64)
    multi = np.zeros(1, dtype=np.int64)
    for _ in range(q):
        multi = (multi[:, None] | (union[:, None] & masks[None, :])).ravel()
        union = (union[:, None] | masks[None, :]).ravel()
    return union, union & ~multi


def tuple_masks(masks: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Union mask and exactly-once mask of every tuple in S^q (mixed-radix order)."""
    if BACKEND == "numba":
        return _tuple_masks_nb(masks, q)
    return _tuple_masks_np(masks, q)


# --------------------------------------------------------- classification

@_njit
def _classify_nb(src_mask, src_absent, tgt_mask, tgt_absent):
    n = src_mask.shape[0]
    out = np.empty(n, dtype=np.int8)
    for i in range(n):
        sa = src_absent[i]
        ta = tgt_absent[i]
        if sa and ta:
            out[i] = 0
        elif sa:
            out[i] = 1
        elif ta:
            out[i] = 2
        else:
            s = src_mask[i]
            t = tgt_mask[i]
            if s == t:
                out[i] = 0
            elif t & s == s:
                out[i] = 1
            elif t & s == t:
                out[i] = 2
            else:
                out[i] = 3
    return out


def _classify_np(src_mask, src_absent, tgt_mask, tgt_absent):
    out = np.full(src_mask.shape[0], INCOMPARABLE, dtype=np.int8)
    both = ~src_absent & ~tgt_absent
    inter = src_mask & tgt_mask
    out[both & (inter == tgt_mask) & (inter != src_mask)] = LOWERING
    out[both & (inter == src_mask) & (inter != tgt_mask)] = RAISING
    out[both & (src_mask == tgt_mask)] = STRICT
    out[src_absent & tgt_absent] = STRICT
    out[src_absent & ~tgt_absent] = RAISING
    out[~src_absent & tgt_absent] = LOWERING
    return out


def classify(src_mask, src_absent, tgt_mask, tgt_absent) -> np.ndarray:
    """Envelope comparison per operator entry; ABSENT sits below every member."""
    if BACKEND == "numba":
        return _classify_nb(src_mask, src_absent, tgt_mask, tgt_absent)
    return _classify_np(src_mask, src_absent, tgt_mask, tgt_absent)


# ------------------------------------------------------- placement keys

@_njit
def _placement_nb(masks, q, nverts, union, once):
    S = masks.shape[0]
    total = S**q
    out = np.zeros((total, nverts), dtype=np.int64)
    for idx in range(total):
        rem = idx
        nonfree = union[idx] & ~once[idx]
        for pos in range(q - 1, -1, -1):
            m = masks[rem % S] & nonfree
            rem //= S
            for v in range(nverts):
                if m >> v & 1:
                    out[idx, v] |= np.int64(1) << pos
    return out


def _placement_np(masks, q, nverts, union, once):
    S = masks.shape[0]
    total = S**q
    idx = np.arange(total, dtype=np.int64)
    nonfree = union & ~once
    out = np.zeros((total, nverts), dtype=np.int64)
    rem = idx.copy()
    for pos in range(q - 1, -1, -1):
        m = masks[rem % S] & nonfree
        rem //= S
        for v in range(nverts):
            out[:, v] |= ((m >> v) & 1) << pos
    return out


def placement(masks, q, nverts, union, once) -> np.ndarray:
    """Slot-set of every non-free vertex, per tuple (zero for free/absent vertices)."""
    if BACKEND == "numba":
        return _placement_nb(masks, q, nverts, union, once)
    return _placement_np(masks, q, nverts, union, once)


# ----------------------------------------------- combinatorial inverse

@_njit
def _word_parity(slot_masks, free_bits, slots, q):
    # fixed symbols: one boundary per slot plus every non-free occurrence
    k = free_bits.shape[0]
    par = 0
    for t in range(k):
        a = slots[t]
        b = free_bits[t]
        higher = ~((b << 1) - 1)
        par += _popcount(slot_masks[a] & higher)
        for i in range(a + 1, q):
            par += 1 + _popcount(slot_masks[i])
        for u in range(t + 1, k):
            if slots[u] < a:
                par += 1
    return par & 1


@_njit
def _rearrange_nb(cols, masks, q, union, once, sorted_masks, sorted_order,
                  nverts, n_of, weights):
    S = masks.shape[0]
    # first pass: count outputs
    count = 0
    for c in range(cols.shape[0]):
        k = _popcount(once[cols[c]])
        count += q**k
    rows = np.empty(count, dtype=np.int64)
    outc = np.empty(count, dtype=np.int64)
    vals = np.empty(count, dtype=np.int64)
    pos_out = 0
    slot = np.empty(q, dtype=np.int64)
    base = np.empty(q, dtype=np.int64)
    newm = np.empty(q, dtype=np.int64)
    for c in range(cols.shape[0]):
        e = cols[c]
        free = once[e]
        n = n_of[e]
        rem = e
        for pos in range(q - 1, -1, -1):
            slot[pos] = masks[rem % S]
            rem //= S
        k = _popcount(free)
        bits = np.empty(k, dtype=np.int64)
        home = np.empty(k, dtype=np.int64)
        t = 0
        for v in range(nverts):
            b = np.int64(1) << v
            if free & b:
                bits[t] = b
                for i in range(q):
                    if slot[i] & b:
                        home[t] = i
                t += 1
        for i in range(q):
            base[i] = slot[i] & ~free
        par_src = _word_parity(base, bits, home, q)
        assign = np.zeros(k, dtype=np.int64)
        for _ in range(q**k):
            for i in range(q):
                newm[i] = base[i]
            moved = 0
            for t in range(k):
                newm[assign[t]] |= bits[t]
                if assign[t] != home[t]:
                    moved += 1
            par = (par_src + _word_parity(base, bits, assign, q)) & 1
            target = 0
            for i in range(q):
                j = np.searchsorted(sorted_masks, newm[i])
                target = target * S + sorted_order[j]
            w = weights[n, k, moved]
            rows[pos_out] = target
            outc[pos_out] = e
            vals[pos_out] = -w if par else w
            pos_out += 1
            # next assignment (odometer)
            t = k - 1
            while t >= 0:
                assign[t] += 1
                if assign[t] < q:
                    break
                assign[t] = 0
                t -= 1
    return rows, outc, vals


def _rearrange_np(cols, masks, q, union, once, sorted_masks, sorted_order,
                  nverts, n_of, weights, chunk=4096):
    S = masks.shape[0]
    rows_all, cols_all, vals_all = [], [], []
    kk = np.bitwise_count(once[cols]).astype(np.int64)
    for k in np.unique(kk):
        k = int(k)
        grp = cols[kk == k]
        assign = np.indices((q,) * k).reshape(k, -1).T if k else np.zeros((1, 0), dtype=np.int64)
        A = assign.shape[0]
        for start in range(0, grp.shape[0], chunk):
            E = grp[start:start + chunk]
            m = E.shape[0]
            slot = np.empty((m, q), dtype=np.int64)
            rem = E.copy()
            for pos in range(q - 1, -1, -1):
                slot[:, pos] = masks[rem % S]
                rem //= S
            free = once[E]
            base = slot & ~free[:, None]
            # free bits in increasing vertex order
            bits = np.zeros((m, k), dtype=np.int64)
            home = np.zeros((m, k), dtype=np.int64)
            filled = np.zeros(m, dtype=np.int64)
            for v in range(nverts):
                b = np.int64(1) << v
                has = (free & b) != 0
                rows_i = np.nonzero(has)[0]
                bits[rows_i, filled[rows_i]] = b
                home[rows_i, filled[rows_i]] = np.argmax((slot[rows_i] & b) != 0, axis=1)
                filled[rows_i] += 1
            par_src = _parity_np(base, bits, home[:, None, :], q)[:, 0]
            asg = np.broadcast_to(assign[None, :, :], (m, A, k))
            newm = np.broadcast_to(base[:, None, :], (m, A, q)).copy()
            for t in range(k):
                onehot = asg[:, :, t][:, :, None] == np.arange(q)[None, None, :]
                newm |= np.where(onehot, bits[:, t][:, None, None], 0)
            moved = (asg != home[:, None, :]).sum(axis=2) if k else np.zeros((m, A), dtype=np.int64)
            par = (par_src[:, None] + _parity_np(base, bits, asg, q)) & 1
            pos = sorted_order[np.searchsorted(sorted_masks, newm)]
            target = np.zeros((m, A), dtype=np.int64)
            for i in range(q):
                target = target * S + pos[:, :, i]
            w = weights[n_of[E][:, None], k, moved]
            rows_all.append(target.ravel())
            cols_all.append(np.repeat(E, A))
            vals_all.append(np.where(par == 1, -w, w).ravel())
    if not rows_all:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z
    return np.concatenate(rows_all), np.concatenate(cols_all), np.concatenate(vals_all)


def _parity_np(base, bits, slots, q):
    """Vectorised word parity; base (m,q), bits (m,k), slots (m,A,k)."""
    m, A, k = slots.shape
    par = np.zeros((m, A), dtype=np.int64)
    if k == 0:
        return par
    tail = np.zeros((m, q + 1), dtype=np.int64)
    sizes = np.bitwise_count(base).astype(np.int64) + 1
    for i in range(q - 1, -1, -1):
        tail[:, i] = tail[:, i + 1] + sizes[:, i]
    for t in range(k):
        a = slots[:, :, t]
        b = bits[:, t][:, None]
        higher = ~((b << 1) - 1)
        own = np.take_along_axis(base, a, axis=1)
        par += np.bitwise_count(own & higher).astype(np.int64)
        par += np.take_along_axis(tail, a + 1, axis=1)
        for u in range(t + 1, k):
            par += slots[:, :, u] < a
    return par & 1


def rearrangement_inverse(cols, masks, q, union, once, sorted_masks, sorted_order,
                          nverts, n_of, weights):
    """COO triplets of the combinatorial inverse on the given source tuples."""
    if BACKEND == "numba":
        return _rearrange_nb(cols, masks, q, union, once, sorted_masks, sorted_order,
                             nverts, n_of, weights)
    return _rearrange_np(cols, masks, q, union, once, sorted_masks, sorted_order,
                         nverts, n_of, weights)
