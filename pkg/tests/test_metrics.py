from __future__ import annotations

import random
from fractions import Fraction

import pytest

from partsdesk.metrics import (
    EmptyMatrixError,
    MissingCategoryError,
    PassMatrix,
    category_report,
    compute_report,
    fmt_pct,
    pass_at_1,
    pass_at_k,
    pass_pow_k,
    per_run_rates,
)


def reference_matrix_108x3() -> PassMatrix:
    """108 tasks x 3 runs with per-run passes (27, 29, 27), 19 all-true rows,
    38 rows with >= 1 pass. Constructed: 19 all-true, 7 two-pass rows
    (4x runs 1+2, 3x runs 2+3), 12 single-pass rows (4x run1, 3x run2, 5x run3)."""
    rows: dict[str, tuple[bool, bool, bool]] = {}
    patterns = (
        [(True, True, True)] * 19
        + [(True, True, False)] * 4
        + [(False, True, True)] * 3
        + [(True, False, False)] * 4
        + [(False, True, False)] * 3
        + [(False, False, True)] * 5
    )
    patterns += [(False, False, False)] * (108 - len(patterns))
    for i, pattern in enumerate(patterns):
        rows[f"task-{i:03d}"] = pattern
    return PassMatrix.from_rows(rows)


def test_reference_matrix_construction():
    m = reference_matrix_108x3()
    assert len(m.task_ids) == 108 and m.runs == 3
    per_run = [sum(1 for row in m.cells if row[r]) for r in range(3)]
    assert per_run == [27, 29, 27]
    assert sum(1 for row in m.cells if all(row)) == 19
    assert sum(1 for row in m.cells if any(row)) == 38


def test_reported_aggregates_reproduced():
    m = reference_matrix_108x3()
    assert [fmt_pct(r) for r in per_run_rates(m)] == ["25.0", "26.9", "25.0"]
    assert fmt_pct(pass_at_1(m)) == "25.6"
    assert fmt_pct(pass_at_k(m)) == "35.2"
    assert fmt_pct(pass_pow_k(m)) == "17.6"


def test_baseline_counterpart():
    rows = {f"t{i}": (i < 10,) * 3 for i in range(108)}
    assert fmt_pct(pass_pow_k(PassMatrix.from_rows(rows))) == "9.3"


def test_all_true_and_all_false():
    rows = {f"t{i}": (True, True) for i in range(5)}
    m = PassMatrix.from_rows(rows)
    assert pass_at_1(m) == 1 and pass_at_k(m) == 1 and pass_pow_k(m) == 1
    rows = {f"t{i}": (False, False) for i in range(5)}
    assert pass_at_k(PassMatrix.from_rows(rows)) == 0


def test_single_run_metrics_coincide():
    rng = random.Random(8)
    rows = {f"t{i}": (rng.random() < 0.5,) for i in range(40)}
    m = PassMatrix.from_rows(rows)
    assert pass_at_1(m) == pass_at_k(m) == pass_pow_k(m)


def test_adding_a_run_never_decreases_pass_at_k():
    rng = random.Random(9)
    for _ in range(50):
        base_rows = {f"t{i}": tuple(rng.random() < 0.4 for _ in range(3)) for i in range(20)}
        extended = {t: row + (rng.random() < 0.4,) for t, row in base_rows.items()}
        assert pass_at_k(PassMatrix.from_rows(extended)) >= pass_at_k(PassMatrix.from_rows(base_rows))


def test_ordering_invariant_random_matrices():
    rng = random.Random(10)
    for _ in range(300):
        tasks = rng.randrange(1, 30)
        runs = rng.randrange(1, 6)
        rows = {f"t{i}": tuple(rng.random() < rng.random() for _ in range(runs)) for i in range(tasks)}
        m = PassMatrix.from_rows(rows)
        assert pass_pow_k(m) <= pass_at_1(m) <= pass_at_k(m)


def test_run_permutation_changes_only_per_run_order():
    m = reference_matrix_108x3()
    permuted = PassMatrix(
        task_ids=m.task_ids,
        runs=3,
        cells=tuple((row[2], row[0], row[1]) for row in m.cells),
    )
    assert pass_at_1(permuted) == pass_at_1(m)
    assert pass_at_k(permuted) == pass_at_k(m)
    assert pass_pow_k(permuted) == pass_pow_k(m)
    assert sorted(per_run_rates(permuted)) == sorted(per_run_rates(m))


def test_category_report_matches_reported_row():
    # 15-task category with per-run passes 6, 5, 6
    rows = {f"fin-{i:02d}": (i < 6, i < 5, i < 6) for i in range(15)}
    rows.update({f"ops-{i}": (False, False, False) for i in range(5)})
    categories = {t: ("finance" if t.startswith("fin") else "ops") for t in rows}
    m = PassMatrix.from_rows(rows, categories=categories)
    report_rows = category_report(m)
    assert [r.category for r in report_rows] == ["finance", "ops"]  # sorted by pass@1 desc
    assert fmt_pct(report_rows[0].pass_at_1) == "37.8"
    assert fmt_pct(report_rows[1].pass_pow_k) == "0.0"


def test_single_task_category_all_pass():
    rows = {"solo": (True, True, True), "other": (False, True, False)}
    m = PassMatrix.from_rows(rows, categories={"solo": "a", "other": "b"})
    solo = next(r for r in category_report(m) if r.category == "a")
    assert solo.pass_at_1 == solo.pass_at_k == solo.pass_pow_k == 1


def test_category_partition_weighted_mean():
    rng = random.Random(12)
    rows = {f"t{i}": tuple(rng.random() < 0.5 for _ in range(3)) for i in range(30)}
    categories = {t: f"c{rng.randrange(4)}" for t in rows}
    m = PassMatrix.from_rows(rows, categories=categories)
    weighted = sum(row.pass_at_1 * row.tasks for row in category_report(m))
    assert weighted / len(rows) == pass_at_1(m)


def test_missing_category_raises():
    m = PassMatrix.from_rows({"a": (True,), "b": (False,)}, categories={"a": "x"})
    with pytest.raises(MissingCategoryError):
        category_report(m)
    with pytest.raises(MissingCategoryError):
        category_report(PassMatrix.from_rows({"a": (True,)}))


def test_empty_matrix_rejected():
    with pytest.raises(EmptyMatrixError):
        PassMatrix(task_ids=(), runs=3, cells=())


def test_rounding_half_up():
    assert fmt_pct(Fraction(1, 8)) == "12.5"      # 12.5 exactly
    assert fmt_pct(Fraction(125, 1000)) == "12.5"
    assert fmt_pct(Fraction(1249, 10000)) == "12.5"   # 12.49 -> 12.5
    assert fmt_pct(Fraction(1245, 10000)) == "12.5"   # 12.45 half-up -> 12.5
    assert fmt_pct(Fraction(1244, 10000)) == "12.4"
    assert fmt_pct(Fraction(1)) == "100.0"
    assert fmt_pct(Fraction(0)) == "0.0"


def test_csv_ingestion(tmp_path):
    path = tmp_path / "runs.csv"
    path.write_text(
        "task_id,run_idx,pass\n"
        "a,0,true\na,1,false\nb,0,1\nb,1,0\nc,0,false\nc,1,true\n"
    )
    m = PassMatrix.from_csv(path)
    assert m.runs == 2 and len(m.task_ids) == 3
    assert m.cells == ((True, False), (True, False), (False, True))
    assert pass_at_1(m) == Fraction(1, 2)
    assert pass_at_k(m) == Fraction(1)
    assert pass_pow_k(m) == Fraction(0)


def test_buffer_ingestion_and_report(tmp_path, mini_world, mini_tasks):
    from partsdesk.rollout import OracleAgent, append_buffer, read_buffer, run_group

    path = tmp_path / "buffer.jsonl"
    for task in mini_tasks[:5]:
        append_buffer(run_group(task, OracleAgent(), mini_world, group_size=3, base_seed=4), path)
    categories = {t.id: t.category for t in mini_tasks}
    m = PassMatrix.from_buffer_records(read_buffer(path), categories=categories)
    assert m.runs == 3 and len(m.task_ids) == 5
    report = compute_report(m)
    assert fmt_pct(report.pass_at_1) == "100.0"
    assert report.per_category
    rendered = report.render_text()
    assert "pass@1" in rendered and "pass^3" in rendered
    assert report.to_json()["pass_at_1"]["pct"] == "100.0"
