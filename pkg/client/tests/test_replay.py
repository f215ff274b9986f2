from __future__ import annotations

import copy
import json

import pytest

from partsdesk_client import (
    DivergenceError,
    StdioTransport,
    connect,
    read_records,
    replay_episode,
)
from conftest import run_cli


def test_replay_oracle_records_match_rewards(tcp_endpoint, oracle_traj):
    records = read_records(oracle_traj)[:8]
    factory = lambda task_id: connect(tcp_endpoint, task_id=task_id)  # noqa: E731
    for record in records:
        summary = replay_episode(factory, record)
        assert summary["pass"] == record["pass"]


def test_replay_detects_tampered_tool_result(tcp_endpoint, oracle_traj):
    record = copy.deepcopy(read_records(oracle_traj)[0])
    for turn in record["turns"]:
        if turn.get("role") == "tool":
            turn["tool_result"]["payload"] = {"forged": True}
            break
    with pytest.raises(DivergenceError, match="differs from record"):
        replay_episode(lambda task_id: connect(tcp_endpoint, task_id=task_id), record)


def test_replay_detects_tampered_reward(tcp_endpoint, oracle_traj):
    record = copy.deepcopy(read_records(oracle_traj)[0])
    record["reward"]["r_num"] = 0
    with pytest.raises(DivergenceError, match="reward"):
        replay_episode(lambda task_id: connect(tcp_endpoint, task_id=task_id), record)


def test_replay_against_wrong_world_diverges(tmp_path, oracle_traj):
    run_cli("gen-world", "--seed", "1337", "--profile", "mini", "--out", str(tmp_path / "world"))
    run_cli("gen-tasks", "--world", str(tmp_path / "world"), "--out", str(tmp_path / "tasks"))
    run_cli("pack", "--world", str(tmp_path / "world"), "--tasks", str(tmp_path / "tasks"),
            "--out", str(tmp_path / "bundle"))
    import sys

    transport = StdioTransport([sys.executable, "-m", "partsdesk.cli", "serve",
                                "--bundle", str(tmp_path / "bundle"), "--stdio"])
    try:
        record = read_records(oracle_traj)[0]
        with pytest.raises(DivergenceError, match="world"):
            replay_episode(lambda task_id: connect(transport), record)
    finally:
        transport.close()


def test_replay_empty_turn_record_scores_empty_response(tcp_endpoint, bundle_dir):
    task_doc = json.loads(sorted((bundle_dir / "tasks").glob("*.json"))[0].read_text())
    record = {
        "task_id": task_doc["id"],
        "rollout_idx": 0,
        "seed": 0,
        "world_digest": "",
        "turns": [],
        "final_response": "",
        "turn_count": 1,
    }
    summary = replay_episode(lambda task_id: connect(tcp_endpoint, task_id=task_id), record)
    assert summary["pass"] is False
    assert summary["reward"]["r_num"] == 0
