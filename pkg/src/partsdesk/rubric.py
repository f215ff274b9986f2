"""Tasks, rubrics, and reward computation.

A rubric is an ordered list of binary criteria; the reward is the exact
rational fraction of satisfied criteria, and a task passes only when every
criterion is satisfied. Built-in check types evaluate deterministically
against the finalized trajectory and the episode's session state; only the
``external-judge`` type may call out, through a pluggable callable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Protocol

from .world import EntityId, EpisodeSession

CATEGORIES = ("information-retrieval", "communication", "reasoning", "multi-step-workflow")
CHECK_TYPES = (
    "response-contains-fact",
    "entity-state-assert",
    "numeric-equals",
    "pattern-match",
    "tool-was-called",
    "external-judge",
)
CRITERION_KINDS = ("completeness", "correctness", "constraint-satisfaction", "format-compliance")

DEFAULT_MAX_TURNS = 40

_NUMBER_RE = re.compile(r"-?\$?\d[\d,]*(?:\.\d+)?")


class TaskSchemaError(ValueError):
    """A task file violates the task schema; the message names the field."""


class TaskParseError(ValueError):
    """A task file is not valid JSON."""


class JudgeUnavailableError(RuntimeError):
    """external-judge criterion reached without a configured judge."""

    def __init__(self, message: str, partial_verdicts: list[dict[str, Any]] | None = None):
        super().__init__(message)
        self.partial_verdicts = partial_verdicts or []


class ExternalJudge(Protocol):
    """Pluggable judge: receives the criterion text, the final response, and a
    state snapshot; returns ``{"satisfied": bool, "rationale": str}``.

    Implementations own their transport concerns (rate limits, bounded-backoff
    retries); the evaluator calls the judge at most once per criterion."""

    def __call__(self, criterion: str, final_response: str, state: dict[str, Any]) -> dict[str, Any]:
        ...


@dataclass(frozen=True)
class CheckSpec:
    type: str
    params: dict[str, Any]


@dataclass(frozen=True)
class RubricCriterion:
    id: str
    kind: str
    check: CheckSpec


@dataclass(frozen=True)
class Rubric:
    criteria: tuple[RubricCriterion, ...]

    def __len__(self) -> int:
        return len(self.criteria)


@dataclass(frozen=True)
class OraclePlan:
    calls: tuple[dict[str, Any], ...]  # [{tool, arguments}, ...]
    final_response: str


@dataclass(frozen=True)
class Task:
    id: str
    category: str
    prompt: str
    system_prompt_ref: str
    rubric: Rubric
    max_turns: int = DEFAULT_MAX_TURNS
    oracle_plan: OraclePlan | None = None

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "id": self.id,
            "category": self.category,
            "prompt": self.prompt,
            "system_prompt_ref": self.system_prompt_ref,
            "max_turns": self.max_turns,
            "rubric": [
                {"id": c.id, "kind": c.kind, "check": {"type": c.check.type, "params": c.check.params}}
                for c in self.rubric.criteria
            ],
        }
        if self.oracle_plan is not None:
            doc["oracle_plan"] = {
                "calls": list(self.oracle_plan.calls),
                "final_response": self.oracle_plan.final_response,
            }
        return doc


@dataclass(frozen=True)
class RewardReport:
    task_id: str
    verdicts: tuple[dict[str, Any], ...]  # {criterion_id, satisfied, evidence}
    r: Fraction
    passed: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "r_num": self.r.numerator,
            "r_den": self.r.denominator,
            "verdicts": list(self.verdicts),
        }


# -- task loading ----------------------------------------------------------------

def task_from_json(doc: dict[str, Any], source: str = "<memory>") -> Task:
    def fail(fieldname: str, why: str) -> TaskSchemaError:
        return TaskSchemaError(f"{source}: field {fieldname!r} {why}")

    for required in ("id", "category", "prompt", "system_prompt_ref", "rubric"):
        if required not in doc:
            raise fail(required, "is missing")
    if doc["category"] not in CATEGORIES:
        raise fail("category", f"must be one of {list(CATEGORIES)}")
    max_turns = doc.get("max_turns", DEFAULT_MAX_TURNS)
    if not isinstance(max_turns, int) or max_turns < 1:
        raise fail("max_turns", "must be a positive integer")
    raw_rubric = doc["rubric"]
    if not isinstance(raw_rubric, list) or not raw_rubric:
        raise fail("rubric", "must be a non-empty list")
    criteria = []
    seen_ids = set()
    for i, c in enumerate(raw_rubric):
        label = c.get("id", f"#{i}")
        if not isinstance(c.get("id"), str) or not c["id"]:
            raise fail(f"rubric[{i}].id", "must be a non-empty string")
        if c["id"] in seen_ids:
            raise fail(f"rubric[{i}].id", f"duplicates criterion id {c['id']!r}")
        seen_ids.add(c["id"])
        if c.get("kind") not in CRITERION_KINDS:
            raise fail(f"rubric criterion {label!r} kind", f"must be one of {list(CRITERION_KINDS)}")
        check = c.get("check", {})
        if check.get("type") not in CHECK_TYPES:
            raise fail(f"rubric criterion {label!r} check.type", f"must be one of {list(CHECK_TYPES)}")
        criteria.append(RubricCriterion(id=c["id"], kind=c["kind"], check=CheckSpec(check["type"], check.get("params", {}))))
    oracle_plan = None
    if "oracle_plan" in doc:
        op = doc["oracle_plan"]
        if not isinstance(op.get("calls"), list) or not isinstance(op.get("final_response"), str):
            raise fail("oracle_plan", "must have 'calls' list and 'final_response' string")
        oracle_plan = OraclePlan(calls=tuple(op["calls"]), final_response=op["final_response"])
    return Task(
        id=doc["id"],
        category=doc["category"],
        prompt=doc["prompt"],
        system_prompt_ref=doc["system_prompt_ref"],
        rubric=Rubric(tuple(criteria)),
        max_turns=max_turns,
        oracle_plan=oracle_plan,
    )


def load_task(path: Path | str) -> Task:
    path = Path(path)
    try:
        doc = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as err:
        raise TaskParseError(f"{path}: {err}") from err
    return task_from_json(doc, source=str(path))


def load_task_dir(tasks_dir: Path | str) -> list[Task]:
    tasks = [load_task(p) for p in sorted(Path(tasks_dir).glob("*.json"))]
    if not tasks:
        raise TaskSchemaError(f"{tasks_dir}: no task files found")
    return tasks


# -- checks ------------------------------------------------------------------------

def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def extract_numbers(text: str) -> list[float]:
    out = []
    for token in _NUMBER_RE.findall(text):
        try:
            out.append(float(token.lstrip("$").replace(",", "")))
        except ValueError:
            continue
    return out


def _tool_calls(trajectory: "TrajectoryLike") -> list[dict[str, Any]]:
    calls = []
    for turn in trajectory.turns:
        if turn.get("role") == "agent" and "tool_call" in turn:
            calls.append(turn["tool_call"])
    return calls


class TrajectoryLike(Protocol):
    turns: list[dict[str, Any]]
    final_response: str


def check_criterion(
    criterion: RubricCriterion,
    trajectory: TrajectoryLike,
    session: EpisodeSession,
    judge: ExternalJudge | None = None,
) -> dict[str, Any]:
    """Evaluate one criterion; returns {criterion_id, satisfied, evidence}."""
    ctype, params = criterion.check.type, criterion.check.params
    response = trajectory.final_response or ""

    if ctype == "response-contains-fact":
        fact = _normalize(str(params["fact"]))
        satisfied = bool(fact) and fact in _normalize(response)
        evidence = f"found {params['fact']!r} in final response" if satisfied else f"final response lacks {params['fact']!r}"

    elif ctype == "entity-state-assert":
        entity_id = EntityId.parse(params["entity"])
        attribute, expected = params["attribute"], params["expected"]
        entity = session.get(entity_id)
        if entity is None:
            satisfied, evidence = False, f"entity {entity_id} not found in session"
        else:
            actual = entity.attributes.get(attribute)
            satisfied = actual == expected
            evidence = f"{entity_id}.{attribute} = {actual!r}" + ("" if satisfied else f", expected {expected!r}")

    elif ctype == "numeric-equals":
        expected = float(params["expected"])
        tolerance = float(params.get("tolerance", 0.01))
        numbers = extract_numbers(response)
        # the 1e-9 guards the boundary against binary float representation noise
        hits = [n for n in numbers if abs(n - expected) <= tolerance + 1e-9]
        satisfied = bool(hits)
        evidence = (
            f"response contains {hits[0]} (expected {expected} ± {tolerance})"
            if satisfied else f"no number within {tolerance} of {expected} in final response"
        )

    elif ctype == "pattern-match":
        flags = re.IGNORECASE if params.get("ignore_case", True) else 0
        match = re.search(params["pattern"], response, flags)
        satisfied = match is not None
        evidence = f"pattern matched {match.group(0)!r}" if match else f"pattern {params['pattern']!r} not found"

    elif ctype == "tool-was-called":
        wanted_tool = params["tool"]
        where = params.get("where", {})
        hit = None
        for call in _tool_calls(trajectory):
            if call["tool"] != wanted_tool:
                continue
            if all(call["arguments"].get(k) == v for k, v in where.items()):
                hit = call
                break
        satisfied = hit is not None
        evidence = (
            f"call {hit['call_id']} invoked {wanted_tool}" if hit
            else f"no call to {wanted_tool}" + (f" with {where}" if where else "")
        )

    elif ctype == "external-judge":
        if judge is None:
            raise JudgeUnavailableError(f"criterion {criterion.id!r} needs an external judge and none is configured")
        verdict = judge(params["criterion"], response, {"session_digest": session.digest()})
        satisfied = bool(verdict["satisfied"])
        evidence = str(verdict.get("rationale", "external judge verdict"))

    else:  # unreachable for schema-validated tasks
        raise TaskSchemaError(f"unknown check type {ctype!r}")

    return {"criterion_id": criterion.id, "satisfied": satisfied, "evidence": evidence}


def evaluate(
    rubric: Rubric,
    trajectory: TrajectoryLike,
    session: EpisodeSession,
    task_id: str = "",
    judge: ExternalJudge | None = None,
) -> RewardReport:
    """Reward = satisfied / |criteria| as an exact rational; pass requires all."""
    verdicts: list[dict[str, Any]] = []
    for criterion in rubric.criteria:
        try:
            verdicts.append(check_criterion(criterion, trajectory, session, judge))
        except JudgeUnavailableError as err:
            raise JudgeUnavailableError(str(err), partial_verdicts=verdicts) from err
    satisfied = sum(1 for v in verdicts if v["satisfied"])
    r = Fraction(satisfied, len(rubric.criteria))
    return RewardReport(
        task_id=task_id,
        verdicts=tuple(verdicts),
        r=r,
        passed=satisfied == len(rubric.criteria),
    )
