from __future__ import annotations

import pytest

from partsdesk import suite, worldgen

MINI_SEED = 42


@pytest.fixture(scope="session")
def mini_world():
    return worldgen.generate_world(MINI_SEED, "mini")


@pytest.fixture(scope="session")
def mini_tasks(mini_world):
    return suite.build_task_suite(mini_world)


@pytest.fixture(scope="session")
def mini_bundle_dir(tmp_path_factory, mini_world, mini_tasks):
    from partsdesk import bundle as bundle_mod

    root = tmp_path_factory.mktemp("bundle")
    tasks_dir = root / "task-src"
    bundle_mod.write_tasks(mini_tasks, tasks_dir)
    out = root / "bundle"
    bundle_mod.pack_bundle(mini_world, tasks_dir, out)
    return out


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
