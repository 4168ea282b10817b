"""Misspecified Bernoulli instance: the ERM-to-optimum KL ratio stays flat in H."""
from arkl.experiments import SweepConfig, run_approximation_sweep

cfg = SweepConfig(instance={"construction": "bernoulli"}, H=[1, 2, 4, 8, 16], n=[10_000], trials=100, seed=2)
res = run_approximation_sweep(cfg)

for key, cell in res.summary["cells"].items():
    print(f"{key:<14s} mean KL {cell['mean_kl']:.3e}  class optimum {cell['min_class_kl']:.3e}  ratio {cell['ratio']:.4f}")
print("max/min ratio across H:", round(res.summary["by_n"]["10000"]["spread"], 4))
