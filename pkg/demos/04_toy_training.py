"""Close the RL loop on the rubric bandit.

Sixteen rollouts per update, rewards from the real rubric evaluator,
group-relative advantages, and the asymmetric-clip surrogate. Uniform
guessing earns ~0.19; the policy should clear 0.9 within a few hundred
updates.
"""

from partsdesk.grpo import RubricBanditFamily, TrainerConfig, group_advantages, train_toy

print("advantage examples:")
print("  [1, 1, 1, 1] ->", group_advantages([1, 1, 1, 1]).values)
print("  [1, 0]       ->", group_advantages([1, 0], eps=0).values)

family = RubricBanditFamily()
policy = family.new_policy()
curve = train_toy(family, policy, steps=300, cfg=TrainerConfig(group_size=16, seed=8))

for point in curve[:: max(1, len(curve) // 12)]:
    bar = "#" * int(40 * point["mean_reward"])
    print(f"step {point['step']:>4}  reward {point['mean_reward']:.3f}  pass {point['mean_pass']:.2f}  {bar}")

crossed = next((p["step"] for p in curve if p["mean_reward"] > 0.9), None)
print(f"\nstarted at {curve[0]['mean_reward']:.3f}, crossed 0.9 at update {crossed}")
print("learned action probabilities:")
for state in policy.actions:
    probs = policy.probs(state)
    best = max(range(len(probs)), key=lambda i: probs[i])
    print(f"  {state:<16} -> {policy.actions[state][best]!r} (p={probs[best]:.2f})")
