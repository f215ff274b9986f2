from __future__ import annotations

import re
import subprocess
import sys
import time

import pytest

SERVE_CMD = [sys.executable, "-m", "partsdesk.cli", "serve"]


def run_cli(*args: str) -> subprocess.CompletedProcess:
    result = subprocess.run(
        [sys.executable, "-m", "partsdesk.cli", *args], capture_output=True, text=True,
    )
    assert result.returncode == 0, (args, result.stdout, result.stderr)
    return result


@pytest.fixture(scope="session")
def bundle_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundle-src")
    run_cli("gen-world", "--seed", "42", "--profile", "mini", "--out", str(root / "world"))
    run_cli("gen-tasks", "--world", str(root / "world"), "--out", str(root / "tasks"))
    run_cli("pack", "--world", str(root / "world"), "--tasks", str(root / "tasks"),
            "--out", str(root / "bundle"))
    return root / "bundle"


@pytest.fixture(scope="session")
def oracle_traj(bundle_dir, tmp_path_factory):
    path = tmp_path_factory.mktemp("traj") / "oracle.jsonl"
    run_cli("run", "--bundle", str(bundle_dir), "--agent", "oracle", "--group-size", "1",
            "--seeds", "1", "--out", str(path))
    return path


@pytest.fixture(scope="session")
def scripted_trajs(bundle_dir, oracle_traj, tmp_path_factory):
    """Reference buffers from the in-process harness: oracle plus the two
    scripted non-oracle agents, captured through the CLI."""
    out = tmp_path_factory.mktemp("traj-extra")
    paths = {"oracle": oracle_traj}
    for agent in ("greedy", "random"):
        path = out / f"{agent}.jsonl"
        run_cli("run", "--bundle", str(bundle_dir), "--agent", agent, "--group-size", "1",
                "--seeds", "3", "--out", str(path))
        paths[agent] = path
    return paths


@pytest.fixture(scope="session")
def tcp_endpoint(bundle_dir):
    proc = subprocess.Popen(
        SERVE_CMD + ["--bundle", str(bundle_dir), "--listen", "127.0.0.1:0"],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    line = proc.stdout.readline()
    match = re.search(r"on ([\d.]+):(\d+)", line)
    assert match, f"serve did not announce an address: {line!r}"
    yield f"{match.group(1)}:{match.group(2)}"
    proc.terminate()
    proc.wait(timeout=10)


@pytest.fixture(scope="session")
def stdio_argv(bundle_dir):
    return SERVE_CMD + ["--bundle", str(bundle_dir), "--stdio"]


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker:
        item.config._acceptance_lines.append((marker.args[0], marker.args[1], report.passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = sorted(getattr(config, "_acceptance_lines", []))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, description, passed in lines:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] criterion {num}: {description}")
