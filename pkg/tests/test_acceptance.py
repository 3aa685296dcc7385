"""Acceptance criteria 1 to 11, each run exactly and reported as one PASS/FAIL line.

Run directly with `python3 tests/test_acceptance.py`, or through pytest, which
prints the same lines in its terminal summary.
"""
from __future__ import annotations

import sys
import time
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from discrete_ainfty.ainfty import (FLAVORS, TopologyError, associator, build_tower, compare_embedded,
                                    conjugator, formula_table, verify_all_relations,
                                    verify_components, verify_epsilon_cancellation, verify_nilpotent)
from discrete_ainfty.calculus import d_form, d_operator, del_form, del_operator, wedge_operator
from discrete_ainfty.chains import GradedOperator, block, tuple_space
from discrete_ainfty.complex import CATALOGUE, closed_simplex, dim
from discrete_ainfty.locality import (compare_inverses, homotopy_on_cells, invert_local_laplacian_comb,
                                      laplacian, laplacian_local, lifted_d, lifted_del, local_inverse,
                                      local_K, local_parts_d, local_parts_del, spectrum_survey,
                                      verify_plusminus)
from goldens import formula_goldens
from reference import (DISC_D, DISC_D_MATRICES, DISC_DEL, DISC_DEL_MATRICES, DISC_WEDGE,
                       LAPLACE_LOC_EXAMPLE, LOCAL_BLOCKS, MULTIPLICITY_TABLES, PAIR_D_LOC,
                       PAIR_DEL_LOC, STAR_D, STAR_DEL, STAR_LAPLACE)

RESULTS: dict[int, tuple[bool, str]] = {}
TITLES = {
    1: "golden d, del, Laplacian matrices",
    2: "wedge table on the 2-disc",
    3: "localization goldens",
    4: "Laplacian spectra on closed simplexes N<=5, p<=3",
    5: "combinatorial inverse equals Vieta pseudo-inverse",
    6: "1-D tower: m3 (0,1,1) and associator",
    7: "relation suite n<=4, grades<=4",
    8: "structural identities",
    9: "conjugation components and D^2=0",
    10: "locality under embedding",
    11: "coefficient tables (non-gating)",
}
ALL = ("1-simplex", "2-disc", "3-simplex", "star", "sphere")


def _cx(name):
    return CATALOGUE[name]()


def _degree_indices(M, deg):
    return [i for i, s in enumerate(M.simplexes) if dim(s) == deg]


def _single(chain):
    return {k[0]: v for k, v in chain.terms.items()}


# ------------------------------------------------------------ criteria

def criterion_1():
    disc, star = _cx("2-disc"), _cx("star")
    bad = []
    for M, D, DL, name in ((disc, DISC_D, DISC_DEL, "2-disc"), (star, STAR_D, STAR_DEL, "star")):
        for s, want in D.items():
            if _single(d_form(s, M)) != want:
                bad.append(f"d{s} on {name}")
        for s, want in DL.items():
            if _single(del_form(s, M)) != want:
                bad.append(f"del{s} on {name}")
    d, dl = d_operator(disc), del_operator(disc)
    for deg, want in DISC_D_MATRICES.items():
        rows = _degree_indices(disc, deg + 1)
        got = d.dense(rows, _degree_indices(disc, deg)) if rows else [[0] * len(want[0])]
        if got != want:
            bad.append(f"d matrix on {deg}-forms")
    if d.column(((1, 2, 3),)).terms:
        bad.append("d on the top form")
    for deg, want in DISC_DEL_MATRICES.items():
        got = dl.dense(_degree_indices(disc, deg - 1), _degree_indices(disc, deg))
        if got != want:
            bad.append(f"del matrix on {deg}-forms")
    if not laplacian(disc).equals(GradedOperator.identity(disc, 1).scale(3)):
        bad.append("2-disc Laplacian != 3 id")
    for deg, want in STAR_LAPLACE.items():
        idx = _degree_indices(star, deg)
        if laplacian(star).dense(idx, idx) != want:
            bad.append(f"star Laplacian on {deg}-forms")
    return not bad, "all golden images and matrices match" if not bad else "mismatch: " + ", ".join(bad)


def criterion_2():
    disc = _cx("2-disc")
    w = wedge_operator(disc)
    bad = [(a, b) for (a, b), want in DISC_WEDGE.items() if _single(w.column((a, b))) != want]
    return not bad, f"{len(DISC_WEDGE)} products checked" + (f", mismatches {bad}" if bad else "")


def criterion_3():
    disc = _cx("2-disc")
    dloc = local_parts_d(disc, 2).strict
    delloc = local_parts_del(disc, 2).strict
    bad = []
    for e, want in PAIR_D_LOC.items():
        if dloc.column(e).terms != {k: Fraction(v) for k, v in want.items()}:
            bad.append(f"[d]{e}")
    for e, want in PAIR_DEL_LOC.items():
        if delloc.column(e).terms != {k: Fraction(v) for k, v in want.items()}:
            bad.append(f"[del]{e}")
    e, want = LAPLACE_LOC_EXAMPLE
    if laplacian_local(disc, 2).column(e).terms != {k: Fraction(v) for k, v in want.items()}:
        bad.append("Laplacian_loc example")
    for sigma, tau, basis, mat, _ in LOCAL_BLOCKS:
        if block(laplacian_local(disc, 2), sigma, set(tau)) != (basis, mat):
            bad.append(f"block {sigma},{tau}")
    return not bad, "6 localized images, the Laplacian_loc image and 3 blocks match" if not bad else str(bad)


def criterion_4():
    blocks = 0
    bad = []
    seen: dict[tuple[int, int], set] = {}
    for N in range(1, 6):
        M = closed_simplex(N)
        for p in (1, 2, 3):
            for chk in spectrum_survey(M, p):
                blocks += 1
                if not (chk.annihilated and chk.multiplicities_ok):
                    bad.append((N, p, chk.sigma, chk.tau, chk.ranks))
                seen.setdefault((p, len(chk.tau)), set()).add(
                    tuple(r // chk.n_cells for r in chk.ranks))
    for p in (2, 3):
        for k, want in MULTIPLICITY_TABLES[p].items():
            if k > 3:
                continue
            if seen.get((p, k), {want}) != {want}:
                bad.append(("table", p, k, seen[(p, k)]))
    return not bad, f"{blocks} blocks annihilated with matching ranks" if not bad else f"failures {bad[:3]}"


def criterion_5():
    bad = []
    n = 0
    for name in ("2-disc", "3-simplex"):
        M = _cx(name)
        for p in (2, 3):
            r = compare_inverses(M, p)
            n += r.basis_count
            if not r.passed:
                bad.append((name, p, r.counterexample))
            # second route: the per-tuple rule against the assembled kernel
            inv = local_inverse(M, p)
            space = tuple_space(M, p)
            for i in range(0, space.size, 1 if space.size <= 512 else 13):
                if space.absent[i]:
                    continue
                t = space.decode(i)
                if invert_local_laplacian_comb(t, M) != inv.column(t):
                    bad.append((name, p, t))
                    break
    return not bad, f"{n} tuples agree" if not bad else str(bad)


def criterion_6():
    link = _cx("1-simplex")
    T = build_tower(link, 3, "local")
    e = (1, 2)
    got = {i: T((i,), e, e).coefficient(e) for i in (1, 2)}
    want = {1: Fraction(-1, 8), 2: Fraction(1, 8)}
    table = formula_table("m3", (0, 1, 1)).as_dict()
    table_ok = table == {"a(j)b(i,j)c(i,j)": Fraction(1, 8), "a(i)b(i,j)c(i,j)": Fraction(-1, 8)}
    m3_ok = got == want
    assoc_ok = True
    for i in (1, 2):
        for j in (1, 2):
            quarter = Fraction(1, 4) * (1 if i == j else -1)
            # ∧∘∧ = a∧(b∧c) − (a∧b)∧c, the negative of the quarter-rule defect
            if associator((i,), (j,), e, link).coefficient(e) != -quarter:
                assoc_ok = False
    detail = (f"associator quarter rule {'ok' if assoc_ok else 'FAILS'}; "
              f"m3(f,psi,chi)_12 coefficient of f_2 is {got[2]} (target 1/8), table {'ok' if table_ok else 'differs'}")
    return m3_ok and table_ok and assoc_ok, detail


def criterion_7():
    runs, bad, info = 0, [], 0
    for name in ALL:
        M = _cx(name)
        for flavor in FLAVORS:
            if name == "sphere" and flavor != "local":
                try:
                    build_tower(M, 3, flavor)
                    bad.append((name, flavor, "expected topology error"))
                except TopologyError:
                    pass
                continue
            T = build_tower(M, 4, flavor)
            for r in verify_all_relations(T, 4, 4):
                runs += 1
                if not r.passed:
                    bad.append((name, flavor, r.name, r.grade, r.counterexample))
            info += sum(r.failures for r in verify_all_relations(T, 4, 4, forms_only=False))
    detail = (f"{runs} relation/grade checks on tuples without an empty-simplex slot"
              f"; with empty-simplex slots {info} basis tuples fail, forced by ∅∧x=0 and d∅ = sum of vertices")
    return not bad, detail if not bad else f"failures {bad[:3]}"


def criterion_8():
    bad = []
    for name in ALL:
        M = _cx(name)
        d, dl, w = d_operator(M), del_operator(M), wedge_operator(M)
        if not (d @ d).is_zero() or not (dl @ dl).is_zero():
            bad.append((name, "d^2/del^2"))
        for p in (2, 3, 4):
            if not (lifted_d(M, p) @ lifted_d(M, p)).is_zero() or not (lifted_del(M, p) @ lifted_del(M, p)).is_zero():
                bad.append((name, p, "lifted d^2/del^2"))
        if (d @ w + w @ lifted_d(M, 2)).failing_columns(tuple_space(M, 2).forms_only()).size:
            bad.append((name, "d wedge + wedge d"))
        T = build_tower(M, 4, "local")
        for p in (2, 3, 4):
            for r in verify_plusminus(M, p):
                if not r.passed:
                    bad.append((name, p, r.name))
            K = local_K(M, p)
            if not (K @ K).is_zero():
                bad.append((name, p, "[K]^2"))
            if not homotopy_on_cells(M, p).passed:
                bad.append((name, p, "[d][K]+[K][d]"))
        for p in (3, 4):
            if not verify_epsilon_cancellation(M, T, p).passed:
                bad.append((name, p, "M o eps"))
    return not bad, "all identities hold on the five complexes, grades 2 to 4" if not bad else str(bad[:4])


def criterion_9():
    comp_fail, nil_fail, comp_total = [], [], 0
    for name in ("1-simplex", "2-disc"):
        M = _cx(name)
        for flavor in ("local", "naive-right"):
            c = conjugator(build_tower(M, 4, flavor), 4)
            for r in verify_components(c):
                comp_total += 1
                if not r.passed:
                    comp_fail.append(f"{name}/{flavor} {r.name.split()[2]}:{r.failures}")
            nil_fail += [(name, flavor, r.grade) for r in verify_nilpotent(c) if not r.passed]
    detail = (f"D^2=0 {'holds' if not nil_fail else 'fails'} on grades<=4; "
              f"{len(comp_fail)}/{comp_total} graded components differ from the tower "
              f"(e.g. {', '.join(comp_fail[:3])})")
    return not comp_fail and not nil_fail, detail


def criterion_10():
    disc, tetra = _cx("2-disc"), _cx("3-simplex")
    local = compare_embedded(build_tower(disc, 3, "local"), build_tower(tetra, 3, "local"), 3)
    naive = [compare_embedded(build_tower(disc, 3, f), build_tower(tetra, 3, f), 3)
             for f in ("naive-left", "naive-right")]
    ok = local.passed and all(not r.passed for r in naive)
    detail = (f"local agrees on {local.basis_count} tuples; naive differs on "
              + ", ".join(f"{r.failures} ({r.name.split()[1]})" for r in naive))
    return ok, detail


def criterion_11():
    wanted = {(1, 1, 1), (2, 1, 1), (1, 2, 1), (1, 1, 2)}
    out = []
    ok = True
    for op, sig, ref in formula_goldens():
        if op != "m3" or sig not in wanted:
            continue
        mine = formula_table("m3", sig).as_dict()
        diff = [k for k in set(ref) | set(mine) if ref.get(k) != mine.get(k)]
        flipped = all(mine.get(k) == -ref.get(k) for k in ref) and set(ref) == set(mine)
        if diff:
            ok = False
            out.append(f"{sig}: {len(diff)} differ" + (" (global sign)" if flipped else ""))
        else:
            out.append(f"{sig}: {len(ref)} terms exact")
    return ok, "; ".join(out)


CRITERIA = {n: globals()[f"criterion_{n}"] for n in TITLES}


def run_criterion(n: int) -> tuple[bool, str]:
    if n not in RESULTS:
        t = time.perf_counter()
        ok, detail = CRITERIA[n]()
        RESULTS[n] = (ok, f"{detail} [{time.perf_counter() - t:.1f}s]")
        print(result_line(n))
    return RESULTS[n]


def result_line(n: int) -> str:
    ok, detail = RESULTS[n]
    return f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {TITLES[n]}: {detail}"


# ---------------------------------------------------------------- pytest

@pytest.mark.parametrize("n", [n for n in TITLES if n != 11])
def test_criterion(n):
    ok, detail = run_criterion(n)
    assert ok, detail


def test_criterion_11_nongating():
    ok, detail = run_criterion(11)
    if not ok:
        pytest.xfail(detail)


if __name__ == "__main__":
    for n in TITLES:
        run_criterion(n)
