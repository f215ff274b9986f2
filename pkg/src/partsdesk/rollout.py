"""Episode lifecycle and group rollout orchestration.

``run_episode`` forks a session, drives an agent policy until it produces a
final response or hits the turn cap, then scores the rubric against the
finished trajectory and session. ``run_group`` runs G independent episodes
(seeds ``base_seed + i``) for one task, each on its own fork, and
``append_buffer`` writes line-delimited records with exact rational rewards.

Scripted policies are pure functions of (task, seed, visible history), so a
whole group replays byte-identically regardless of execution order.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Protocol

from .rubric import ExternalJudge, RewardReport, Task, evaluate
from .toolkit import ToolCall, ToolResult, ToolRuntime, tool_catalog
from .world import EpisodeSession, WorldState, fork_session

_BUFFER_LOCK = threading.Lock()


@dataclass
class Trajectory:
    task_id: str
    rollout_idx: int
    seed: int
    turns: list[dict[str, Any]] = field(default_factory=list)
    final_response: str = ""
    turn_count: int = 0
    agent_fault: str | None = None

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "task_id": self.task_id,
            "rollout_idx": self.rollout_idx,
            "seed": self.seed,
            "turns": self.turns,
            "final_response": self.final_response,
            "turn_count": self.turn_count,
        }
        if self.agent_fault is not None:
            doc["agent_fault"] = self.agent_fault
        return doc

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "Trajectory":
        return cls(
            task_id=doc["task_id"],
            rollout_idx=doc["rollout_idx"],
            seed=doc["seed"],
            turns=doc["turns"],
            final_response=doc["final_response"],
            turn_count=doc["turn_count"],
            agent_fault=doc.get("agent_fault"),
        )


@dataclass
class RolloutGroup:
    task_id: str
    size: int
    world_digest: str
    trajectories: list[Trajectory]
    rewards: list[Fraction]
    reports: list[RewardReport]


@dataclass(frozen=True)
class EpisodeView:
    """What a policy sees when deciding its next action."""

    task: Task
    seed: int
    system_prompt: str
    turns: list[dict[str, Any]]
    step: int  # agent actions taken so far


class AgentPolicy(Protocol):
    name: str

    def decide(self, view: EpisodeView) -> ToolCall | str:
        """Return the next tool call, or a string to finish the episode."""
        ...


class OracleAgent:
    """Replays the task's oracle plan, then answers with its final response."""

    name = "oracle"

    def decide(self, view: EpisodeView) -> ToolCall | str:
        plan = view.task.oracle_plan
        if plan is None:
            return ""
        if view.step < len(plan.calls):
            call = plan.calls[view.step]
            return ToolCall(call["tool"], dict(call["arguments"]), f"call-{view.step + 1}")
        return plan.final_response


class RandomAgent:
    """Uniform over schema-valid tool calls; finishes with a best-effort summary."""

    name = "random"

    def decide(self, view: EpisodeView) -> ToolCall | str:
        rng = random.Random((view.seed, view.task.id, view.step).__str__())
        if view.step > 0 and rng.random() < 0.2:
            return self._summarize(view)
        defs = tool_catalog()
        defn = defs[rng.randrange(len(defs))]
        args: dict[str, Any] = {}
        pool = self._string_pool(view)
        for pname, spec in defn.params.items():
            if not spec.get("required") and rng.random() < 0.5:
                continue
            if "enum" in spec:
                args[pname] = spec["enum"][rng.randrange(len(spec["enum"]))]
            elif spec.get("format") == "date":
                args[pname] = f"2025-{rng.randrange(1, 7):02d}-{rng.randrange(1, 29):02d}"
            elif spec["type"] == "string":
                args[pname] = pool[rng.randrange(len(pool))]
            elif spec["type"] == "integer":
                args[pname] = max(spec.get("min", 0), rng.randrange(1, 10))
            elif spec["type"] == "number":
                args[pname] = float(rng.randrange(1, 500))
            elif spec["type"] == "boolean":
                args[pname] = rng.random() < 0.5
        return ToolCall(defn.name, args, f"call-{view.step + 1}")

    @staticmethod
    def _string_pool(view: EpisodeView) -> list[str]:
        pool = [w.strip(".,()'\"") for w in view.task.prompt.split() if len(w) > 3]
        for turn in view.turns:
            result = turn.get("tool_result")
            if result and result["status"] == "ok":
                for item in result["payload"].get("items", [])[:2]:
                    pool.append(item.get("id", ""))
        return [p for p in pool if p] or ["unknown"]

    @staticmethod
    def _summarize(view: EpisodeView) -> str:
        bits = []
        for turn in view.turns:
            result = turn.get("tool_result")
            if result and result["status"] == "ok":
                bits.append(json.dumps(result["payload"])[:120])
        return "Here is what I found: " + " | ".join(bits[-3:]) if bits else "I could not determine the answer."


class GreedyKeywordAgent:
    """Search-first strategy: throws prompt keywords at every search tool, then
    answers from whatever came back first. Deliberately naive."""

    name = "greedy"

    SEARCH_TOOLS = (
        "searchOrders", "searchProducts", "searchTickets",
        "searchShipments", "searchKnowledgebase", "searchCustomers",
    )

    def decide(self, view: EpisodeView) -> ToolCall | str:
        if view.step < len(self.SEARCH_TOOLS):
            keywords = " ".join(w for w in view.task.prompt.split() if len(w) > 4)[:60]
            tool = self.SEARCH_TOOLS[view.step]
            args = {"query": keywords} if tool in ("searchProducts", "searchKnowledgebase", "searchCustomers") else {}
            return ToolCall(tool, args, f"call-{view.step + 1}")
        bits = []
        for turn in view.turns:
            result = turn.get("tool_result")
            if result and result["status"] == "ok" and result["payload"].get("items"):
                first = result["payload"]["items"][0]
                bits.append(f"{first['kind']} {first['id']}")
        return "Best matches found: " + ", ".join(bits) if bits else "No matching records found."


AGENTS: dict[str, type] = {
    "oracle": OracleAgent,
    "random": RandomAgent,
    "greedy": GreedyKeywordAgent,
}


class ProtocolFault(RuntimeError):
    """The episode loop itself broke (not the agent); aborts the rollout."""


def run_episode(
    task: Task,
    agent: AgentPolicy,
    world: WorldState,
    seed: int,
    rollout_idx: int = 0,
    system_prompt: str = "",
    judge: ExternalJudge | None = None,
) -> tuple[Trajectory, RewardReport, EpisodeSession]:
    session = fork_session(world)
    runtime = ToolRuntime(session)
    trajectory = Trajectory(task_id=task.id, rollout_idx=rollout_idx, seed=seed)
    trajectory.turns.append({"role": "system", "text": system_prompt or task.system_prompt_ref})
    trajectory.turns.append({"role": "user", "text": task.prompt})

    for step in range(task.max_turns):
        view = EpisodeView(task=task, seed=seed, system_prompt=system_prompt,
                           turns=trajectory.turns, step=step)
        try:
            action = agent.decide(view)
        except Exception as err:  # agent-fault: record and score what happened
            trajectory.agent_fault = f"{type(err).__name__}: {err}"
            trajectory.turn_count = step
            break
        if isinstance(action, str):
            trajectory.final_response = action
            trajectory.turns.append({"role": "agent", "text": action})
            trajectory.turn_count = step + 1
            break
        result = runtime.invoke(action)
        if result.call_id != action.call_id:
            raise ProtocolFault(f"result call_id {result.call_id!r} != call {action.call_id!r}")
        trajectory.turns.append({"role": "agent", "tool_call": action.to_json()})
        trajectory.turns.append({"role": "tool", "tool_result": result.to_json()})
    else:
        trajectory.turn_count = task.max_turns  # hit the cap; finalize with what exists

    report = evaluate(task.rubric, trajectory, session, task_id=task.id, judge=judge)
    return trajectory, report, session


def run_group(
    task: Task,
    agent: AgentPolicy,
    world: WorldState,
    group_size: int = 16,
    base_seed: int = 0,
    workers: int | None = None,
    system_prompt: str = "",
    judge: ExternalJudge | None = None,
) -> RolloutGroup:
    if group_size < 1:
        raise ValueError("group_size must be >= 1")

    def one(idx: int) -> tuple[Trajectory, RewardReport]:
        trajectory, report, _ = run_episode(
            task, agent, world, seed=base_seed + idx, rollout_idx=idx,
            system_prompt=system_prompt, judge=judge,
        )
        return trajectory, report

    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(group_size)))
    else:
        results = [one(i) for i in range(group_size)]

    trajectories = [t for t, _ in results]
    reports = [r for _, r in results]
    return RolloutGroup(
        task_id=task.id,
        size=group_size,
        world_digest=world.digest,
        trajectories=trajectories,
        rewards=[r.r for r in reports],
        reports=reports,
    )


def buffer_record(trajectory: Trajectory, report: RewardReport, world_digest: str) -> dict[str, Any]:
    doc = trajectory.to_json()
    doc["world_digest"] = world_digest
    doc["reward"] = report.to_json()
    doc["pass"] = report.passed
    return doc


def append_buffer(group: RolloutGroup, path: Path | str) -> int:
    """Append one JSONL record per trajectory; each record is written atomically."""
    path = Path(path)
    lines = [
        json.dumps(buffer_record(t, r, group.world_digest), ensure_ascii=False)
        for t, r in zip(group.trajectories, group.reports)
    ]
    blob = "".join(line + "\n" for line in lines)
    with _BUFFER_LOCK:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(blob)
    return len(lines)


def read_buffer(path: Path | str) -> list[dict[str, Any]]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


@dataclass
class RescoreResult:
    record: dict[str, Any]
    report: RewardReport
    drift: list[str]

    @property
    def reward_matches(self) -> bool:
        stored = self.record["reward"]
        return (
            Fraction(stored["r_num"], stored["r_den"]) == self.report.r
            and self.record["pass"] == self.report.passed
            and list(self.report.verdicts) == stored["verdicts"]
        )


def rescore_record(
    record: dict[str, Any],
    task: Task,
    world: WorldState,
    judge: ExternalJudge | None = None,
) -> RescoreResult:
    """Replay a buffer record's tool calls on a fresh fork and re-evaluate the rubric.

    Any tool result that differs from the stored one is reported as drift.
    """
    drift: list[str] = []
    if record["world_digest"] != world.digest:
        drift.append(f"world digest mismatch: record {record['world_digest'][:12]}, world {world.digest[:12]}")
    session = fork_session(world)
    runtime = ToolRuntime(session)
    replayed: ToolResult | None = None
    for turn in record["turns"]:
        if turn.get("role") == "agent" and "tool_call" in turn:
            replayed = runtime.invoke(ToolCall.from_json(turn["tool_call"]))
        elif turn.get("role") == "tool":
            stored = turn["tool_result"]
            if replayed is None or replayed.to_json() != stored:
                drift.append(f"call {stored['call_id']}: replayed result differs")
            replayed = None
    trajectory = Trajectory.from_json(record)
    report = evaluate(task.rubric, trajectory, session, task_id=task.id, judge=judge)
    return RescoreResult(record=record, report=report, drift=drift)
