"""Command-line front end: validate, operator, formula, verify."""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from pathlib import Path

from .ainfty import (FLAVORS, OPERATIONS, ContractError, TopologyError, build_tower, conjugator,
                     formula_table, verify_all_relations, verify_consistency, verify_degrees,
                     verify_epsilon_cancellation, verify_strict_locality, verify_nilpotent)
from .calculus import d_operator, del_operator, wedge_operator
from .chains import GradeError, block, tuple_space
from .complex import CATALOGUE, ComplexError, OrderedComplex, canonical, dim, load_complex
from .locality import homotopy_on_cells, laplacian, laplacian_local, local_K, verify_plusminus
from .report import CheckResult

SCHEMA = 1
OPERATORS = ("d", "del", "wedge", "laplace", "laplace-loc")


class UsageError(ValueError):
    pass


def resolve_complex(source: str) -> OrderedComplex:
    """A JSON path, or the name of a catalogue complex."""
    if source in CATALOGUE and not Path(source).exists():
        return CATALOGUE[source]()
    return load_complex(source)


def _label(s) -> str:
    return "∅" if not s else "{" + ",".join(map(str, s)) + "}"


def _tuple_label(t) -> str:
    return "⊗".join(_label(s) for s in t)


def format_matrix(rows: list[str], cols: list[str], values: list[list[Fraction]]) -> str:
    cells = [[str(v) for v in r] for r in values]
    width = max([len(c) for c in cols] + [len(x) for r in cells for x in r] + [1])
    lw = max([len(r) for r in rows] + [1])
    lines = [" " * lw + " | " + " ".join(c.rjust(width) for c in cols)]
    for label, r in zip(rows, cells):
        lines.append(label.ljust(lw) + " | " + " ".join(x.rjust(width) for x in r))
    return "\n".join(lines)


# ------------------------------------------------------------ validate

def cmd_validate(args) -> int:
    M = resolve_complex(args.complex)
    print(M.summary())
    return 0


# ------------------------------------------------------------ operator

def operator_dump(M: OrderedComplex, which: str, grade: int = 1, degree: int | None = None,
                  block_spec: tuple[str, str] | None = None) -> tuple[str, dict]:
    if which not in OPERATORS:
        raise UsageError(f"unknown operator {which!r}; choose from {', '.join(OPERATORS)}")
    if which == "laplace-loc":
        op = laplacian_local(M, grade)
    elif which == "laplace":
        op = laplacian(M, grade)
    elif which == "wedge":
        op = wedge_operator(M)
    else:
        if grade != 1:
            raise UsageError(f"{which} is dumped on single forms; use laplace for tuples")
        op = d_operator(M) if which == "d" else del_operator(M)
    src = tuple_space(M, op.source_grade)
    tgt = tuple_space(M, op.target_grade)
    if block_spec is not None:
        sigma = canonical(int(x) for x in block_spec[0].split(",") if x)
        tau = {int(x) for x in block_spec[1].split(",") if x}
        basis, values = block(op, sigma, tau)
        labels = [_tuple_label(t) for t in basis]
        rows = cols = labels
        data = {"rows": labels, "cols": labels}
    else:
        def pick(space, deg):
            idx = range(space.size)
            if deg is None:
                return list(idx)
            return [i for i in idx if sum(dim(s) for s in space.decode(i)) == deg]

        col_idx = pick(src, degree)
        out_deg = None if degree is None or op.degree is None else degree + op.degree
        row_idx = pick(tgt, out_deg)
        values = op.dense(row_idx, col_idx)
        rows = [_tuple_label(tgt.decode(i)) for i in row_idx]
        cols = [_tuple_label(src.decode(i)) for i in col_idx]
        data = {"rows": rows, "cols": cols}
    data["operator"] = which
    data["entries"] = [[str(v) for v in r] for r in values]
    text = format_matrix(rows, cols, values)
    if which == "d" and degree == 0:
        aug = op.column(((),))
        terms = " + ".join(f"{v}·{_label(k[0])}" for k, v in sorted(aug.terms.items()))
        text += f"\naugmentation: d(∅) = {terms or '0'}"
    return text, data


def cmd_operator(args) -> int:
    M = resolve_complex(args.complex)
    text, data = operator_dump(M, args.which, args.grade, args.degree,
                               tuple(args.block) if args.block else None)
    print(text)
    if args.json:
        Path(args.json).write_text(json.dumps(data, indent=1, ensure_ascii=False) + "\n")
    return 0


# ------------------------------------------------------------- formula

def _parse_signature(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace("(", "").replace(")", "").split(",") if x.strip())
    except ValueError as exc:
        raise UsageError(f"bad signature {text!r}") from exc


def cmd_formula(args) -> int:
    sig = _parse_signature(args.signature)
    try:
        table = formula_table(args.operation, sig, args.vertices, args.flavor)
    except ValueError as exc:
        if isinstance(exc, (ContractError, TopologyError)):
            raise
        raise UsageError(str(exc)) from exc
    print(table.render())
    if args.json:
        payload = {"schema": SCHEMA, "operation": table.operation, "signature": list(table.signature),
                   "terms": [{"coefficient": f"{c.numerator}/{c.denominator}", "monomial": m}
                             for c, m in table.terms]}
        Path(args.json).write_text(json.dumps(payload, indent=1) + "\n")
    return 0


# -------------------------------------------------------------- verify

def verification_suite(M: OrderedComplex, p_max: int, flavor: str) -> list[CheckResult]:
    """Every exact invariant for one tower; informational entries carry gating=False."""
    tower = build_tower(M, p_max, flavor)
    checks = verify_all_relations(tower, p_max, p_max)
    for r in verify_all_relations(tower, p_max, p_max, forms_only=False):
        r.extra["gating"] = False
        checks.append(r)
    checks += [verify_consistency(tower, p) for p in range(2, p_max + 1)]
    checks.append(verify_degrees(tower))
    if flavor == "local":
        checks.append(verify_strict_locality(tower))
        for p in range(2, p_max + 1):
            checks += verify_plusminus(M, p)
            K = local_K(M, p)
            checks.append(CheckResult("[K]^2", p, K.num.shape[1], (K @ K).is_zero()))
            checks.append(homotopy_on_cells(M, p))
        checks += [verify_epsilon_cancellation(M, tower, p) for p in range(3, p_max + 1)]
    if flavor != "naive-left":
        conj = conjugator(tower, p_max)
        checks += verify_nilpotent(conj)
    return checks


def build_report(name: str, flavor: str, p_max: int, checks: list[CheckResult]) -> dict:
    return {"schema": SCHEMA, "complex": name, "flavor": flavor, "p_max": p_max,
            "checks": [c.to_json() for c in checks]}


def cmd_verify(args) -> int:
    M = resolve_complex(args.complex)
    checks = verification_suite(M, args.p_max, args.flavor)
    report = build_report(args.complex, args.flavor, args.p_max, checks)
    first_bad = None
    for c in checks:
        gating = c.extra.get("gating", True)
        status = "PASS" if c.passed else ("FAIL" if gating else "info")
        print(f"{status}  {c.name:<32} grade {c.grade}  basis {c.basis_count}"
              + (f"  failures {c.failures}" if c.failures else ""))
        if gating and not c.passed and first_bad is None:
            first_bad = c
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=1) + "\n")
    if first_bad is not None:
        print(f"first counterexample ({first_bad.name}, grade {first_bad.grade}): "
              f"{first_bad.counterexample}", file=sys.stderr)
        return 1
    print("all checks pass")
    return 0


# ---------------------------------------------------------------- main

def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="discrete-ainfty",
                                 description="Exact discrete forms and their A∞ tower.")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="load a complex and report simplex counts")
    v.add_argument("--complex", required=True, help="JSON file or catalogue name")
    v.set_defaults(func=cmd_validate)

    o = sub.add_parser("operator", help="dump an exact operator matrix")
    o.add_argument("which", help="|".join(OPERATORS))
    o.add_argument("--complex", required=True)
    o.add_argument("--grade", type=int, default=1, help="tensor grade (laplace, laplace-loc)")
    o.add_argument("--degree", type=int, default=None, help="total source form degree")
    o.add_argument("--block", nargs=2, metavar=("SIGMA", "TAU"),
                   help="restrict to the block with envelope SIGMA and free set TAU, e.g. 1,2 2")
    o.add_argument("--json")
    o.set_defaults(func=cmd_operator)

    f = sub.add_parser("formula", help="emit a coefficient table")
    f.add_argument("operation", choices=sorted(OPERATIONS))
    f.add_argument("signature", help="degree tuple such as 0,1,1")
    f.add_argument("-N", "--vertices", type=int, default=None)
    f.add_argument("--flavor", choices=FLAVORS, default="local")
    f.add_argument("--json")
    f.set_defaults(func=cmd_formula)

    r = sub.add_parser("verify", help="run the invariant suite")
    r.add_argument("--complex", required=True)
    r.add_argument("--p-max", type=int, default=4)
    r.add_argument("--flavor", choices=FLAVORS, default="local")
    r.add_argument("--json")
    r.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        ap.error(str(exc))
    except TopologyError as exc:
        print(f"topology error: {exc}", file=sys.stderr)
        return 3
    except (ComplexError, GradeError, ContractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
