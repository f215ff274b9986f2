from __future__ import annotations

import json
import shutil

import pytest

from partsdesk.bundle import (
    BundleValidationError,
    load_bundle,
    pack_bundle,
    validate_bundle,
)
from partsdesk.cli import main


def _find(findings, code):
    return [f for f in findings if f["code"] == code]


def test_pack_and_validate_round_trip(mini_bundle_dir, mini_tasks):
    assert validate_bundle(mini_bundle_dir) == []
    loaded = load_bundle(mini_bundle_dir)
    assert loaded.manifest.task_count == len(mini_tasks)
    assert len(loaded.tasks) == len(mini_tasks)
    assert loaded.system_prompt_for(loaded.tasks[0]).strip() != ""


def test_manifest_fields(mini_bundle_dir, mini_world):
    manifest = json.loads((mini_bundle_dir / "manifest.json").read_text())
    assert manifest["world"]["digest"] == mini_world.digest
    assert manifest["world"]["seed"] == mini_world.seed
    assert set(manifest["paths"]) == {"tasks_dir", "entities_dir", "system_prompts_dir", "tools_file"}


def test_tampered_entity_file_reported(tmp_path, mini_bundle_dir):
    bundle = tmp_path / "bundle"
    shutil.copytree(mini_bundle_dir, bundle)
    target = bundle / "entities" / "product.json"
    docs = json.loads(target.read_text())
    docs[0]["attributes"]["price"] = 1.23
    target.write_text(json.dumps(docs, sort_keys=True, separators=(",", ":")))
    findings = validate_bundle(bundle)
    assert _find(findings, "digest-mismatch")


def test_missing_tools_file_reported(tmp_path, mini_bundle_dir):
    bundle = tmp_path / "bundle"
    shutil.copytree(mini_bundle_dir, bundle)
    (bundle / "tools.json").unlink()
    findings = validate_bundle(bundle)
    assert _find(findings, "missing-file")


def test_task_with_unknown_prompt_reported(tmp_path, mini_bundle_dir):
    bundle = tmp_path / "bundle"
    shutil.copytree(mini_bundle_dir, bundle)
    task_path = next(iter(sorted((bundle / "tasks").glob("*.json"))))
    doc = json.loads(task_path.read_text())
    doc["system_prompt_ref"] = "system-prompts/ghost.md"
    task_path.write_text(json.dumps(doc))
    findings = validate_bundle(bundle)
    assert _find(findings, "missing-prompt")


def test_broken_task_file_reported(tmp_path, mini_bundle_dir):
    bundle = tmp_path / "bundle"
    shutil.copytree(mini_bundle_dir, bundle)
    task_path = next(iter(sorted((bundle / "tasks").glob("*.json"))))
    doc = json.loads(task_path.read_text())
    doc["rubric"] = []
    task_path.write_text(json.dumps(doc))
    findings = validate_bundle(bundle)
    assert _find(findings, "bad-task")


def test_pack_refuses_bad_inputs(tmp_path, mini_world):
    with pytest.raises(BundleValidationError, match="no task files"):
        pack_bundle(mini_world, tmp_path / "empty", tmp_path / "out")


# -- CLI ------------------------------------------------------------------------

def test_cli_full_pipeline(tmp_path, capsys):
    world_dir = tmp_path / "world"
    tasks_dir = tmp_path / "tasks"
    bundle_dir = tmp_path / "bundle"
    traj = tmp_path / "traj.jsonl"

    assert main(["gen-world", "--seed", "42", "--profile", "mini", "--out", str(world_dir)]) == 0
    assert main(["gen-tasks", "--world", str(world_dir), "--out", str(tasks_dir)]) == 0
    assert main(["pack", "--world", str(world_dir), "--tasks", str(tasks_dir), "--out", str(bundle_dir)]) == 0
    assert main(["validate", "--bundle", str(bundle_dir)]) == 0
    assert main(["run", "--bundle", str(bundle_dir), "--agent", "oracle", "--group-size", "2",
                 "--seeds", "1", "--out", str(traj), "--workers", "2"]) == 0
    assert main(["eval", "--bundle", str(bundle_dir), "--traj", str(traj)]) == 0
    assert main(["metrics", "--traj", str(traj), "--bundle", str(bundle_dir)]) == 0
    out = capsys.readouterr().out
    assert "pass@1" in out and "100.0%" in out


def test_cli_run_byte_identical_across_invocations(tmp_path):
    world_dir = tmp_path / "world"
    tasks_dir = tmp_path / "tasks"
    bundle_dir = tmp_path / "bundle"
    main(["gen-world", "--seed", "7", "--profile", "mini", "--out", str(world_dir)])
    main(["gen-tasks", "--world", str(world_dir), "--out", str(tasks_dir)])
    main(["pack", "--world", str(world_dir), "--tasks", str(tasks_dir), "--out", str(bundle_dir)])
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for out in (a, b):
        assert main(["run", "--bundle", str(bundle_dir), "--agent", "random", "--group-size", "3",
                     "--seeds", "5", "--out", str(out), "--workers", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_validate_json_flag_and_failure_exit(tmp_path, mini_bundle_dir, capsys):
    bundle = tmp_path / "bundle"
    shutil.copytree(mini_bundle_dir, bundle)
    (bundle / "tools.json").unlink()
    assert main(["validate", "--bundle", str(bundle), "--json"]) == 1
    out = capsys.readouterr().out
    assert json.loads(out)["findings"]


def test_cli_metrics_csv_and_json(tmp_path, capsys):
    csv_path = tmp_path / "runs.csv"
    csv_path.write_text("task_id,run_idx,pass\na,0,true\na,1,true\nb,0,false\nb,1,true\n")
    assert main(["metrics", "--csv", str(csv_path), "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["pass_at_k"]["pct"] == "100.0"
    assert doc["pass_pow_k"]["pct"] == "50.0"


def test_cli_train_toy(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"G": 8, "steps": 20, "seed": 4, "learning_rate": 0.4}))
    out = tmp_path / "curve.jsonl"
    assert main(["train-toy", "--config", str(cfg), "--out", str(out)]) == 0
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    assert len(lines) == 20
    assert {"step", "mean_reward", "mean_pass", "grad_norm"} == set(lines[0])


def test_cli_eval_detects_tampered_reward(tmp_path, capsys):
    world_dir, tasks_dir, bundle_dir = tmp_path / "w", tmp_path / "t", tmp_path / "b"
    traj = tmp_path / "traj.jsonl"
    main(["gen-world", "--seed", "42", "--profile", "mini", "--out", str(world_dir)])
    main(["gen-tasks", "--world", str(world_dir), "--out", str(tasks_dir)])
    main(["pack", "--world", str(world_dir), "--tasks", str(tasks_dir), "--out", str(bundle_dir)])
    main(["run", "--bundle", str(bundle_dir), "--agent", "oracle", "--group-size", "1",
          "--seeds", "1", "--out", str(traj), "--tasks", "ir-status-ord-00001"])
    record = json.loads(traj.read_text().splitlines()[0])
    record["reward"]["r_num"] = 0
    record["pass"] = False
    traj.write_text(json.dumps(record) + "\n")
    assert main(["eval", "--bundle", str(bundle_dir), "--traj", str(traj)]) == 1


def test_cli_errors_exit_nonzero(tmp_path, capsys):
    assert main(["validate", "--bundle", str(tmp_path / "nope")]) == 1
    assert main(["gen-tasks", "--world", str(tmp_path / "nope"), "--out", str(tmp_path / "t")]) == 1
