"""Compare the numba and numpy kernel backends on the local-inverse assembly.

usage: python3 benchmarks/bench_kernels.py [--repeat 3] [--vertices 4 5] [--grades 2 3 4]
"""
import argparse
import time

import numpy as np

from discrete_ainfty import _kernels
from discrete_ainfty.chains import tuple_space
from discrete_ainfty.complex import closed_simplex
from discrete_ainfty.locality import local_inverse


def run(M, p):
    space = tuple_space.__wrapped__(M, p)
    place = _kernels.placement(M.masks, p, len(M.vertices), space.union, space.once)
    inv = local_inverse.__wrapped__(M, p)
    return space, place, inv


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--vertices", type=int, nargs="+", default=[3, 4, 5])
    ap.add_argument("--grades", type=int, nargs="+", default=[2, 3, 4])
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'N':>2} {'p':>2} {'tuples':>9} {'nnz':>9} {'numpy s':>9} {'numba s':>9} {'speedup':>8}  same")
    for N in args.vertices:
        M = closed_simplex(N)
        for p in args.grades:
            if M.size**p > 2_000_000:
                continue
            _kernels.set_backend("numba")
            run(M, p)  # compile and warm caches
            t_nb, (_, place_nb, inv_nb) = best_of(lambda: run(M, p), args.repeat)
            _kernels.set_backend("numpy")
            t_np, (_, place_np, inv_np) = best_of(lambda: run(M, p), args.repeat)
            same = np.array_equal(place_nb, place_np) and inv_nb.equals(inv_np)
            print(f"{N:>2} {p:>2} {M.size**p:>9} {inv_nb.nnz:>9} {t_np:>9.4f} {t_nb:>9.4f} "
                  f"{t_np / t_nb:>8.1f}  {same}")
    _kernels.set_backend("numba")


if __name__ == "__main__":
    main()
