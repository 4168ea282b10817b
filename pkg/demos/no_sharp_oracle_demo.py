"""How often ERM lands a full per-step gap above the best-in-class KL, for each sign of the truth."""
from arkl.experiments import run_no_sharp_oracle_experiment

for learner in ("erm", "bayes_mode", "oracle"):
    res = run_no_sharp_oracle_experiment([100, 400], 1000, learner, seed=3)
    for n, f in res.summary["frequencies"].items():
        signs = ", ".join(f"{s}: {v:.3f}" for s, v in f["by_sign"].items())
        print(f"{learner:<10s} n={n:<4s} gap {f['gap_per_step']:.4f}  frequency by sign {signs}")
