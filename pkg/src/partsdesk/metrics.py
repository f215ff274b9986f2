"""pass@1 / pass@k / pass^k over task-by-run pass matrices.

pass@1 is the mean of per-run pass rates (not pooled trials), pass@k the
fraction of tasks passed on at least one run, pass^k the fraction passed on
every run. All arithmetic is exact rational; percentages round half-up to
one decimal only at display time. The "±" on pass@1 is the population std
of the per-run rates (the source material leaves its definition open).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable


class EmptyMatrixError(ValueError):
    """Metrics need at least one task and one run."""


class MissingCategoryError(KeyError):
    """category_report requires a category for every task."""


@dataclass(frozen=True)
class PassMatrix:
    task_ids: tuple[str, ...]
    runs: int
    cells: tuple[tuple[bool, ...], ...]  # rows = tasks, cols = runs
    categories: dict[str, str] | None = None

    def __post_init__(self) -> None:
        if not self.task_ids or self.runs < 1:
            raise EmptyMatrixError("pass matrix needs >= 1 task and >= 1 run")
        if len(self.cells) != len(self.task_ids):
            raise ValueError("one row per task required")
        for task_id, row in zip(self.task_ids, self.cells):
            if len(row) != self.runs:
                raise ValueError(f"task {task_id!r} has {len(row)} cells, expected {self.runs}")

    @classmethod
    def from_rows(cls, rows: dict[str, Iterable[bool]], categories: dict[str, str] | None = None) -> "PassMatrix":
        task_ids = tuple(sorted(rows))
        cells = tuple(tuple(bool(v) for v in rows[t]) for t in task_ids)
        runs = len(cells[0]) if cells else 0
        return cls(task_ids=task_ids, runs=runs, cells=cells, categories=categories)

    @classmethod
    def from_buffer_records(cls, records: list[dict[str, Any]], categories: dict[str, str] | None = None) -> "PassMatrix":
        rows: dict[str, dict[int, bool]] = {}
        for record in records:
            rows.setdefault(record["task_id"], {})[record["rollout_idx"]] = bool(record["pass"])
        normalized = {}
        for task_id, by_idx in rows.items():
            normalized[task_id] = [by_idx[i] for i in sorted(by_idx)]
        return cls.from_rows(normalized, categories=categories)

    @classmethod
    def from_csv(cls, path: Path | str) -> "PassMatrix":
        rows: dict[str, dict[int, bool]] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                value = row["pass"].strip().lower()
                rows.setdefault(row["task_id"], {})[int(row["run_idx"])] = value in ("1", "true", "yes")
        return cls.from_rows({t: [by[i] for i in sorted(by)] for t, by in rows.items()})


def per_run_rates(matrix: PassMatrix) -> list[Fraction]:
    n = len(matrix.task_ids)
    return [
        Fraction(sum(1 for row in matrix.cells if row[run]), n)
        for run in range(matrix.runs)
    ]


def pass_at_1(matrix: PassMatrix) -> Fraction:
    """Mean of per-run pass rates."""
    rates = per_run_rates(matrix)
    return sum(rates, Fraction(0)) / len(rates)


def pass_at_k(matrix: PassMatrix) -> Fraction:
    """Fraction of tasks passed on at least one run."""
    return Fraction(sum(1 for row in matrix.cells if any(row)), len(matrix.task_ids))


def pass_pow_k(matrix: PassMatrix) -> Fraction:
    """Fraction of tasks passed on every run."""
    return Fraction(sum(1 for row in matrix.cells if all(row)), len(matrix.task_ids))


def fmt_pct(value: Fraction) -> str:
    """Exact half-up rounding of a fraction to a one-decimal percentage string."""
    scaled = value * 1000  # tenths of a percent
    q, r = divmod(scaled.numerator, scaled.denominator)
    if 2 * r >= scaled.denominator:
        q += 1
    return f"{q // 10}.{q % 10}"


def _std_pct(rates: list[Fraction]) -> float:
    values = [float(r) * 100.0 for r in rates]
    mean = sum(values) / len(values)
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


@dataclass(frozen=True)
class CategoryRow:
    category: str
    tasks: int
    pass_at_1: Fraction
    pass_at_k: Fraction
    pass_pow_k: Fraction


@dataclass(frozen=True)
class MetricsReport:
    tasks: int
    runs: int
    pass_at_1: Fraction
    pass_at_k: Fraction
    pass_pow_k: Fraction
    per_run: tuple[Fraction, ...]
    pass_at_1_std_pct: float
    per_category: tuple[CategoryRow, ...] = ()

    def to_json(self) -> dict[str, Any]:
        def pair(f: Fraction) -> list[int]:
            return [f.numerator, f.denominator]

        doc: dict[str, Any] = {
            "tasks": self.tasks,
            "runs": self.runs,
            "pass_at_1": {"pct": fmt_pct(self.pass_at_1), "fraction": pair(self.pass_at_1)},
            "pass_at_k": {"pct": fmt_pct(self.pass_at_k), "fraction": pair(self.pass_at_k)},
            "pass_pow_k": {"pct": fmt_pct(self.pass_pow_k), "fraction": pair(self.pass_pow_k)},
            "per_run_pct": [fmt_pct(r) for r in self.per_run],
            "pass_at_1_std_pct": round(self.pass_at_1_std_pct, 1),
        }
        if self.per_category:
            doc["per_category"] = [
                {
                    "category": row.category,
                    "tasks": row.tasks,
                    "pass_at_1_pct": fmt_pct(row.pass_at_1),
                    "pass_at_k_pct": fmt_pct(row.pass_at_k),
                    "pass_pow_k_pct": fmt_pct(row.pass_pow_k),
                }
                for row in self.per_category
            ]
        return doc

    def render_text(self) -> str:
        k = self.runs
        lines = [
            f"tasks: {self.tasks}   runs: {k}",
            f"pass@1 : {fmt_pct(self.pass_at_1):>6}%  (± {self.pass_at_1_std_pct:.1f}, per-run: "
            + ", ".join(fmt_pct(r) + "%" for r in self.per_run) + ")",
            f"pass@{k} : {fmt_pct(self.pass_at_k):>6}%",
            f"pass^{k} : {fmt_pct(self.pass_pow_k):>6}%",
        ]
        if self.per_category:
            lines.append("")
            header = f"{'category':<24} {'tasks':>5} {'pass@1':>8} {'pass@' + str(k):>8} {'pass^' + str(k):>8}"
            lines.append(header)
            lines.append("-" * len(header))
            for row in self.per_category:
                lines.append(
                    f"{row.category:<24} {row.tasks:>5} {fmt_pct(row.pass_at_1):>7}% "
                    f"{fmt_pct(row.pass_at_k):>7}% {fmt_pct(row.pass_pow_k):>7}%"
                )
        return "\n".join(lines)


def category_report(matrix: PassMatrix) -> list[CategoryRow]:
    """Per-category metrics, sorted by pass@1 descending."""
    if matrix.categories is None:
        raise MissingCategoryError("matrix has no category map")
    missing = [t for t in matrix.task_ids if t not in matrix.categories]
    if missing:
        raise MissingCategoryError(f"no category for tasks: {missing[:5]}")
    buckets: dict[str, list[int]] = {}
    for i, task_id in enumerate(matrix.task_ids):
        buckets.setdefault(matrix.categories[task_id], []).append(i)
    rows = []
    for category, idxs in buckets.items():
        sub = PassMatrix(
            task_ids=tuple(matrix.task_ids[i] for i in idxs),
            runs=matrix.runs,
            cells=tuple(matrix.cells[i] for i in idxs),
        )
        rows.append(CategoryRow(
            category=category,
            tasks=len(idxs),
            pass_at_1=pass_at_1(sub),
            pass_at_k=pass_at_k(sub),
            pass_pow_k=pass_pow_k(sub),
        ))
    rows.sort(key=lambda r: (-r.pass_at_1, r.category))
    return rows


def compute_report(matrix: PassMatrix) -> MetricsReport:
    rates = per_run_rates(matrix)
    return MetricsReport(
        tasks=len(matrix.task_ids),
        runs=matrix.runs,
        pass_at_1=pass_at_1(matrix),
        pass_at_k=pass_at_k(matrix),
        pass_pow_k=pass_pow_k(matrix),
        per_run=tuple(rates),
        pass_at_1_std_pct=_std_pct(rates),
        per_category=tuple(category_report(matrix)) if matrix.categories else (),
    )


def report_json_text(report: MetricsReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True)
