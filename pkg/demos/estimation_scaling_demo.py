"""Joint-KL risk of ERM on the Fano product instance grows like H and shrinks like 1/n."""
from arkl.experiments import SweepConfig, run_estimation_sweep

cfg = SweepConfig(H=[1, 2, 4, 8, 16], n=[50, 200, 800], trials=100, seed=1)
res = run_estimation_sweep(cfg)

print("mean joint KL (rows: H, cols: n)")
print("H    " + "".join(f"{n:>10d}" for n in cfg.n))
for H in cfg.H:
    print(f"{H:<5d}" + "".join(f"{res.mean('joint_kl', H, n):10.4f}" for n in cfg.n))

for s in res.slopes:
    print(f"slope vs {s.axis} at {s.fixed}: {s.slope:+.3f} (window {s.window}, pass={s.passed})")
