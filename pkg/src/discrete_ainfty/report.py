from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class CheckResult:
    name: str
    grade: int
    basis_count: int
    passed: bool
    counterexample: Any = None
    failures: int = 0
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"name": self.name, "grade": self.grade,
               "basis_count": self.basis_count, "pass": self.passed}
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample
        if self.failures:
            out["failures"] = self.failures
        out.update(self.extra)
        return out


def fmt_fraction(x) -> str:
    return f"{x.numerator}/{x.denominator}"


def tuple_label(t) -> list[list[int]]:
    return [list(s) for s in t]

