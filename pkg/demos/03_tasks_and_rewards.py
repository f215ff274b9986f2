"""The shipped task suite: rubrics, rewards, and three scripted agents.

Rewards are exact rationals (satisfied criteria / all criteria); a task
passes only when every criterion is satisfied. The oracle replays each
task's plan; random and greedy show what failure looks like.
"""

import statistics
from collections import Counter

from partsdesk import worldgen
from partsdesk.rollout import GreedyKeywordAgent, OracleAgent, RandomAgent, run_episode
from partsdesk.suite import build_task_suite

world = worldgen.generate_world(seed=42, profile="mini")
tasks = build_task_suite(world)
print(f"{len(tasks)} tasks:", dict(Counter(t.category for t in tasks)))

task = next(t for t in tasks if t.category == "multi-step-workflow")
print(f"\nexample task {task.id}:")
print(" ", task.prompt)
for criterion in task.rubric.criteria:
    print(f"  - [{criterion.kind}] {criterion.check.type} {criterion.check.params}")

trajectory, report, _ = run_episode(task, OracleAgent(), world, seed=1)
print(f"\noracle: r = {report.r} pass = {report.passed} in {trajectory.turn_count} turns")
for verdict in report.verdicts:
    print(f"  {verdict['criterion_id']:<18} {'ok ' if verdict['satisfied'] else 'MISS'} {verdict['evidence']}")

for agent in (RandomAgent(), GreedyKeywordAgent()):
    rewards = [float(run_episode(t, agent, world, seed=7)[1].r) for t in tasks[:12]]
    print(f"{agent.name:>7} agent mean reward over 12 tasks: {statistics.mean(rewards):.3f}")
