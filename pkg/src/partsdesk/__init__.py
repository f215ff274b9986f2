"""Stateful support-desk simulation for tool-using agents.

Modules cover the world store and generator, the 23-tool session runtime
and wire-protocol server, rubric-based rewards, rollout orchestration, a
group-relative policy trainer, reliability metrics, and the bundle/CLI
glue that ties them together.
"""

__version__ = "0.1.0"

from .world import (  # noqa: E402
    Entity,
    EntityId,
    EpisodeSession,
    Mutation,
    WorldState,
    check_integrity,
    fork_session,
)
from .worldgen import PROFILES, GenProfile, NoiseConfig, SIM_TODAY, generate_world, export_world  # noqa: E402
from .toolkit import ToolCall, ToolResult, ToolRuntime, tool_catalog, validate_args  # noqa: E402
from .rubric import CheckSpec, RewardReport, Rubric, RubricCriterion, Task, evaluate, load_task  # noqa: E402
from .rollout import AGENTS, RolloutGroup, Trajectory, append_buffer, run_episode, run_group  # noqa: E402
from .grpo import ClipConfig, ToyPolicy, TrainerConfig, clipped_term, group_advantages, policy_gradient, train_toy  # noqa: E402
from .metrics import MetricsReport, PassMatrix, compute_report, pass_at_1, pass_at_k, pass_pow_k  # noqa: E402
from .bundle import Bundle, BundleManifest, load_bundle, pack_bundle, validate_bundle  # noqa: E402
from .suite import build_task_suite  # noqa: E402

__all__ = [
    "AGENTS",
    "Bundle",
    "BundleManifest",
    "CheckSpec",
    "ClipConfig",
    "Entity",
    "EntityId",
    "EpisodeSession",
    "GenProfile",
    "MetricsReport",
    "Mutation",
    "NoiseConfig",
    "PROFILES",
    "PassMatrix",
    "RewardReport",
    "RolloutGroup",
    "Rubric",
    "RubricCriterion",
    "SIM_TODAY",
    "Task",
    "ToolCall",
    "ToolResult",
    "ToolRuntime",
    "ToyPolicy",
    "TrainerConfig",
    "Trajectory",
    "WorldState",
    "append_buffer",
    "build_task_suite",
    "check_integrity",
    "clipped_term",
    "compute_report",
    "evaluate",
    "export_world",
    "fork_session",
    "generate_world",
    "group_advantages",
    "load_bundle",
    "load_task",
    "pack_bundle",
    "pass_at_1",
    "pass_at_k",
    "pass_pow_k",
    "policy_gradient",
    "run_episode",
    "run_group",
    "tool_catalog",
    "train_toy",
    "validate_args",
    "validate_bundle",
]
