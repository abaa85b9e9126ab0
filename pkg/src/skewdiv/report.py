"""Deterministic report assembly and CSV/JSON serialization.

All floats serialize with 17 significant digits ('.17g'), '.' decimal
separator and LF line endings, so identical runs produce byte-identical
files and every double round-trips exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import __version__ as VERSION


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ResidualSummary:
    name: str
    max_abs: float
    max_rel: float
    worst_point: tuple

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "max_abs": self.max_abs,
            "max_rel": self.max_rel,
            "worst_point": list(self.worst_point),
        }


@dataclass(frozen=True)
class Verdict:
    """A pass/fail decision plus the numbers it was computed from."""

    name: str
    value: float
    threshold: float
    kind: str  # "max<=" or "min>=" or "max<"
    passed: bool

    @staticmethod
    def at_most(name: str, value: float, threshold: float) -> "Verdict":
        return Verdict(name, value, threshold, "max<=", value <= threshold)

    @staticmethod
    def at_least(name: str, value: float, threshold: float) -> "Verdict":
        return Verdict(name, value, threshold, "min>=", value >= threshold)

    @staticmethod
    def below(name: str, value: float, threshold: float) -> "Verdict":
        return Verdict(name, value, threshold, "max<", value < threshold)


@dataclass(frozen=True)
class Report:
    scenario: dict
    residuals: tuple[ResidualSummary, ...]
    violations: tuple[dict, ...]
    verdicts: tuple[Verdict, ...]
    version: str = VERSION

    @property
    def all_passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


def summarize_residuals(
    name: str, rows: Iterable[tuple[tuple, float, float]]
) -> ResidualSummary:
    """Fold per-point (point, abs, rel) rows into a summary."""
    worst = None
    max_abs = 0.0
    max_rel = 0.0
    for point, absr, relr in rows:
        if absr >= max_abs:
            max_abs = absr
            worst = point
        max_rel = max(max_rel, relr)
    return ResidualSummary(name, max_abs, max_rel, worst if worst is not None else ())


def report_to_json(report: Report) -> str:
    doc = {
        "version": report.version,
        "scenario": report.scenario,
        "residuals": [r.to_dict() for r in report.residuals],
        "violations": list(report.violations),
        "verdicts": [{"name": v.name, "pass": v.passed} for v in report.verdicts],
    }
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"


def rows_to_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, str):
                cells.append(cell)
            else:
                cells.append(fmt17(cell))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def violation_csv(rows: Iterable, params: dict) -> str:
    """Fixed-column CSV for warped-family reports."""
    k = params.get("k", "")
    c = params.get("c", "")
    columns = (
        "r",
        "x1",
        "k",
        "c",
        "norm_nabla_P_sq",
        "norm_div_P_sq",
        "violation",
        "sharp_margin",
    )
    out_rows = []
    for row in rows:
        out_rows.append(
            (
                row.r,
                row.x1,
                fmt17(k) if k != "" else "",
                fmt17(c) if c != "" else "",
                row.nabla_p_norm_sq,
                row.div_p_norm_sq,
                row.violation,
                row.sharp_margin,
            )
        )
    return rows_to_csv(columns, out_rows)


def write_text(path: str, text: str) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
