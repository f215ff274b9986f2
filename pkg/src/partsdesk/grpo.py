"""Group-relative advantages, the decoupled-clip surrogate, and a toy trainer.

Advantages normalize each reward against its own group:
``A_i = (r_i - mean(r)) / (std_pop(r) + eps)``, with zero-variance groups
mapped to the all-zero vector so they contribute no gradient. The
per-sample surrogate is ``min(ratio * A, clip(ratio, 1-eps_low, 1+eps_high) * A)``
with an asymmetric clip band.

The トrainer closes the loop at desk scale: a tabular softmax policy learns a
three-decision "rubric bandit" whose rewards come from the real rubric
evaluator, one group of G episodes per update.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable

import numpy as np

from .rubric import CheckSpec, Rubric, RubricCriterion, evaluate
from .rollout import Trajectory
from .world import WorldState, fork_session


class EmptyGroupError(ValueError):
    """Advantage computation needs at least one reward."""


class StaleSampleError(ValueError):
    """A sample's old-policy probability is zero; its ratio is undefined."""


class DivergenceError(RuntimeError):
    """Toy training diverged (unbounded logits); carries diagnostics."""

    def __init__(self, message: str, diagnostics: dict[str, Any]):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class ClipConfig:
    eps_low: float = 0.2
    eps_high: float = 0.28

    def __post_init__(self) -> None:
        if not (0.0 < self.eps_low <= self.eps_high < 1.0):
            raise ValueError(f"need 0 < eps_low <= eps_high < 1, got ({self.eps_low}, {self.eps_high})")


@dataclass(frozen=True)
class AdvantageVector:
    values: tuple[float, ...]
    eps: float


def group_advantages(rewards: Iterable[Fraction | float], eps: float = 1e-4) -> AdvantageVector:
    """Std-normalized, mean-centered rewards. All-equal groups map to zeros
    regardless of eps.

    Centering happens in exact rational arithmetic (rubric rewards are
    rationals), so adding a constant to every reward leaves the advantages
    bit-identical for any eps."""
    exact = [Fraction(x) for x in rewards]
    if not exact:
        raise EmptyGroupError("cannot normalize an empty reward group")
    mean = sum(exact, Fraction(0)) / len(exact)
    centered = [x - mean for x in exact]
    if all(c == 0 for c in centered):
        return AdvantageVector(values=tuple(0.0 for _ in exact), eps=eps)
    variance = sum((c * c for c in centered), Fraction(0)) / len(exact)  # population
    std = math.sqrt(variance)
    return AdvantageVector(values=tuple(float(c) / (std + eps) for c in centered), eps=eps)


def clipped_term(ratio: float, advantage: float, cfg: ClipConfig) -> float:
    """Per-sample surrogate contribution: min(ratio*A, clip(ratio)*A)."""
    if ratio <= 0.0:
        raise ValueError(f"importance ratio must be positive, got {ratio}")
    clipped = min(max(ratio, 1.0 - cfg.eps_low), 1.0 + cfg.eps_high)
    return min(ratio * advantage, clipped * advantage)


@dataclass
class ToyPolicy:
    """Tabular softmax policy: a logit per (state key, action id)."""

    actions: dict[str, list[str]]
    temperature: float = 1.0
    logits: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        for state, acts in self.actions.items():
            if state not in self.logits:
                self.logits[state] = np.zeros(len(acts), dtype=np.float64)

    def probs(self, state: str) -> np.ndarray:
        z = self.logits[state] / self.temperature
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    def prob(self, state: str, action: str) -> float:
        return float(self.probs(state)[self.actions[state].index(action)])

    def sample(self, state: str, rng: random.Random) -> str:
        p = self.probs(state)
        roll = rng.random()
        acc = 0.0
        for action, weight in zip(self.actions[state], p):
            acc += float(weight)
            if roll < acc:
                return action
        return self.actions[state][-1]

    def copy(self) -> "ToyPolicy":
        return ToyPolicy(
            actions={s: list(a) for s, a in self.actions.items()},
            temperature=self.temperature,
            logits={s: v.copy() for s, v in self.logits.items()},
        )


@dataclass(frozen=True)
class Sample:
    """One decision drawn during a rollout, tagged with its group advantage."""

    state: str
    action: str
    old_prob: float
    advantage: float


def surrogate_objective(policy: ToyPolicy, samples: list[Sample], cfg: ClipConfig) -> float:
    """Mean clipped surrogate over samples; the quantity policy_gradient differentiates."""
    total = 0.0
    for s in samples:
        if s.old_prob <= 0.0:
            raise StaleSampleError(f"sample ({s.state}, {s.action}) has old_prob 0")
        ratio = policy.prob(s.state, s.action) / s.old_prob
        total += clipped_term(ratio, s.advantage, cfg)
    return total / len(samples) if samples else 0.0


def policy_gradient(
    policy: ToyPolicy, samples: list[Sample], cfg: ClipConfig
) -> dict[str, np.ndarray]:
    """Analytic gradient of the mean clipped surrogate w.r.t. every logit.

    Gradient flows through the unclipped branch only; once the ratio is
    clipped (and clipping is the binding side of the min), the surrogate is
    locally constant in the policy.
    """
    grads = {state: np.zeros_like(v) for state, v in policy.logits.items()}
    if not samples:
        return grads
    scale = 1.0 / len(samples)
    for s in samples:
        if s.old_prob <= 0.0:
            raise StaleSampleError(f"sample ({s.state}, {s.action}) has old_prob 0")
        p = policy.probs(s.state)
        a_idx = policy.actions[s.state].index(s.action)
        ratio = float(p[a_idx]) / s.old_prob
        unclipped = ratio * s.advantage
        clipped = min(max(ratio, 1.0 - cfg.eps_low), 1.0 + cfg.eps_high) * s.advantage
        if unclipped <= clipped:
            # d ratio / d logit_b = ratio * (1[b=a] - p_b) / T
            indicator = np.zeros_like(p)
            indicator[a_idx] = 1.0
            grads[s.state] += scale * s.advantage * ratio * (indicator - p) / policy.temperature
    return grads


# -- rubric bandit family ---------------------------------------------------------

BANDIT_TOOLS = ["getOrder", "getTicket", "searchOrders", "computeOrderTotal"]
BANDIT_TARGETS = ["ord-00001", "ord-00002", "ord-00003", "ord-00004"]
BANDIT_RESPONSES = [
    "Order ord-00002 is currently delivered.",
    "Order ord-00002 was cancelled last week.",
    "I could not find that order.",
    "Please contact the carrier for details.",
]


class RubricBanditFamily:
    """Three sequential decisions (tool, argument, final response), scored by the
    real rubric evaluator: an episode earns 1/3 per satisfied criterion."""

    def __init__(self, correct_tool: str = "getOrder", correct_target: str = "ord-00002",
                 correct_response: str = BANDIT_RESPONSES[0]):
        self.actions = {
            "choose-tool": list(BANDIT_TOOLS),
            "choose-target": list(BANDIT_TARGETS),
            "compose-answer": list(BANDIT_RESPONSES),
        }
        self.rubric = Rubric((
            RubricCriterion("right-tool", "completeness", CheckSpec("tool-was-called", {"tool": correct_tool})),
            RubricCriterion("right-target", "correctness", CheckSpec(
                "tool-was-called", {"tool": correct_tool, "where": {"order_id": correct_target}})),
            RubricCriterion("right-answer", "correctness", CheckSpec(
                "response-contains-fact", {"fact": correct_response})),
        ))
        self._session = fork_session(WorldState(seed=0, entities=[]))

    def new_policy(self, temperature: float = 1.0) -> ToyPolicy:
        return ToyPolicy(actions={s: list(a) for s, a in self.actions.items()}, temperature=temperature)

    def run_episode(self, policy: ToyPolicy, rng: random.Random) -> tuple[list[tuple[str, str, float]], Fraction, bool]:
        tool = policy.sample("choose-tool", rng)
        target = policy.sample("choose-target", rng)
        answer = policy.sample("compose-answer", rng)
        taken = [
            ("choose-tool", tool, policy.prob("choose-tool", tool)),
            ("choose-target", target, policy.prob("choose-target", target)),
            ("compose-answer", answer, policy.prob("compose-answer", answer)),
        ]
        trajectory = Trajectory(task_id="rubric-bandit", rollout_idx=0, seed=0)
        trajectory.turns = [
            {"role": "user", "text": "Report the current status of the customer's order."},
            {"role": "agent", "tool_call": {"tool": tool, "arguments": {"order_id": target}, "call_id": "call-1"}},
        ]
        trajectory.final_response = answer
        report = evaluate(self.rubric, trajectory, self._session, task_id="rubric-bandit")
        return taken, report.r, report.passed


class UniformRewardFamily:
    """Every episode earns the same reward; advantages vanish, so must learning."""

    def __init__(self, reward: Fraction = Fraction(1, 2)):
        self.actions = {"only-state": ["a", "b", "c", "d"]}
        self.reward = reward

    def new_policy(self, temperature: float = 1.0) -> ToyPolicy:
        return ToyPolicy(actions={s: list(a) for s, a in self.actions.items()}, temperature=temperature)

    def run_episode(self, policy: ToyPolicy, rng: random.Random) -> tuple[list[tuple[str, str, float]], Fraction, bool]:
        action = policy.sample("only-state", rng)
        return [("only-state", action, policy.prob("only-state", action))], self.reward, False


@dataclass(frozen=True)
class TrainerConfig:
    group_size: int = 16
    eps_low: float = 0.2
    eps_high: float = 0.28
    eps_std: float = 1e-4
    learning_rate: float = 0.5
    steps: int = 2000
    seed: int = 0

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "TrainerConfig":
        mapped = {
            "group_size": doc.get("G", doc.get("group_size", 16)),
            "eps_low": doc.get("eps_low", 0.2),
            "eps_high": doc.get("eps_high", 0.28),
            "eps_std": doc.get("eps_std", 1e-4),
            "learning_rate": doc.get("learning_rate", 0.5),
            "steps": doc.get("steps", 2000),
            "seed": doc.get("seed", 0),
        }
        return cls(**mapped)


LOGIT_BOUND = 50.0


def train_toy(
    family: Any,
    policy: ToyPolicy,
    steps: int | None = None,
    cfg: TrainerConfig = TrainerConfig(),
) -> list[dict[str, float]]:
    """Synchronous loop: one group of G episodes per update, gradient ascent on
    the clipped surrogate. Returns the learning curve; deterministic per seed."""
    cfg_steps = steps if steps is not None else cfg.steps
    clip = ClipConfig(cfg.eps_low, cfg.eps_high)
    curve: list[dict[str, float]] = []
    for step in range(cfg_steps):
        episodes = []
        for i in range(cfg.group_size):
            rng = random.Random(f"{cfg.seed}|{step}|{i}")
            episodes.append(family.run_episode(policy, rng))
        rewards = [r for _, r, _ in episodes]
        advantages = group_advantages(rewards, eps=cfg.eps_std)
        samples = [
            Sample(state=s, action=a, old_prob=p, advantage=adv)
            for (taken, _, _), adv in zip(episodes, advantages.values)
            for (s, a, p) in taken
        ]
        grads = policy_gradient(policy, samples, clip)
        grad_norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        for state, g in grads.items():
            policy.logits[state] += cfg.learning_rate * g
        worst = max(float(np.max(np.abs(v))) for v in policy.logits.values())
        if worst > LOGIT_BOUND:
            raise DivergenceError(
                f"logits exceeded {LOGIT_BOUND} at step {step}",
                diagnostics={"step": step, "max_abs_logit": worst, "grad_norm": grad_norm},
            )
        curve.append({
            "step": step,
            "mean_reward": sum(float(r) for r in rewards) / len(rewards),
            "mean_pass": sum(1.0 for _, _, p in episodes if p) / len(episodes),
            "grad_norm": grad_norm,
        })
    return curve
