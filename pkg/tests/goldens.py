"""Reference coefficient tables stored as data, parsed into {monomial: coefficient}."""
import json
import re
from fractions import Fraction
from pathlib import Path

DATA = Path(__file__).parent / "data"

_TERM = re.compile(r"([+-]?)\s*(?:(\d+)/(\d+)\s*\\cdot)?\s*((?:[abc]\([a-z, ]+\)\s*)+)")
_FACTOR = re.compile(r"([abc])\(([a-z, ]+)\)")


def parse_body(body: str, scale: Fraction) -> dict[str, Fraction]:
    out: dict[str, Fraction] = {}
    for t in _TERM.finditer(body):
        c = Fraction(int(t[2]), int(t[3])) if t[2] else Fraction(1)
        if t[1] == "-":
            c = -c
        factors = dict(_FACTOR.findall(t[4]))
        mono = "".join(f"{k}({factors[k].replace(' ', '')})" for k in sorted(factors))
        out[mono] = out.get(mono, 0) + c * scale
    return {k: v for k, v in out.items() if v}


def formula_goldens() -> list[tuple[str, tuple[int, ...], dict[str, Fraction]]]:
    rows = json.loads((DATA / "formula_tables.json").read_text())
    return [(r["operation"], tuple(r["signature"]), parse_body(r["body"], Fraction(r["scale"])))
            for r in rows]
