"""Trajectory buffer JSONL reader/writer for framework integration."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable


def read_records(path: Path | str) -> list[dict[str, Any]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def append_records(records: Iterable[dict[str, Any]], path: Path | str) -> int:
    count = 0
    with open(path, "a", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count
