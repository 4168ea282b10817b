"""Worst-case regret over bounded rewards equals total variation, which Pinsker bounds by KL."""
import numpy as np

from arkl import RewardFn, joint_kl, random_seq_policy, regret, total_variation, worst_case_regret

rng = np.random.default_rng(4)
p = random_seq_policy(2, 5, rng)
q = random_seq_policy(2, 5, rng)

wc, best = worst_case_regret(p, q)
print(f"worst-case regret {wc:.6f}, TV {total_variation(p, q).value:.6f}")
print(f"sqrt(KL/2)        {np.sqrt(joint_kl(p, q).value / 2):.6f}")

trials = [regret(p, q, RewardFn(rng.uniform(0, 1, size=2**5), 5, 2)) for _ in range(1000)]
print(f"best of 1000 random [0,1] rewards: {max(trials):.6f}")
