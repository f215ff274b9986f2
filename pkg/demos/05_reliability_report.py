"""Reliability metrics over a rollout buffer.

pass@1 is the mean per-run pass rate, pass@k the fraction of tasks passed
at least once, pass^k the fraction passed every time. pass^k is where
flaky agents get found out.
"""

import tempfile
from pathlib import Path

from partsdesk import worldgen
from partsdesk.metrics import PassMatrix, compute_report, fmt_pct, pass_at_1, pass_at_k, pass_pow_k
from partsdesk.rollout import RandomAgent, append_buffer, read_buffer, run_group
from partsdesk.suite import build_task_suite

world = worldgen.generate_world(seed=42, profile="mini")
tasks = build_task_suite(world)

buffer_path = Path(tempfile.mkstemp(suffix=".jsonl")[1])
for task in tasks:
    append_buffer(run_group(task, RandomAgent(), world, group_size=3, base_seed=11), buffer_path)

matrix = PassMatrix.from_buffer_records(
    read_buffer(buffer_path), categories={t.id: t.category for t in tasks}
)
print(compute_report(matrix).render_text())

# A sparse hand-made matrix shows the three metrics pulling apart.
rows = {f"t{i:02d}": (i % 3 == 0, i % 4 == 0, i % 3 == 0) for i in range(24)}
m = PassMatrix.from_rows(rows)
print("\nhand-made 24x3 matrix:")
print(f"  pass@1 {fmt_pct(pass_at_1(m))}%   pass@3 {fmt_pct(pass_at_k(m))}%   pass^3 {fmt_pct(pass_pow_k(m))}%")
buffer_path.unlink()
