"""Squared-Hellinger risk of ERM when one step policy is shared across the horizon vs chosen per step."""
from arkl.experiments import SweepConfig, hellinger_bound, run_hellinger_comparison

n, delta, m = 400, 0.1, 8
cfg = SweepConfig(instance={"construction": "fano", "m": m, "eps": 0.1}, H=[1, 4, 16], n=[n], trials=100, delta=delta)
res = run_hellinger_comparison(cfg)

print(f"shared-class bound 2 log(m/delta)/n = {hellinger_bound(m, delta, n):.4f}")
for H in cfg.H:
    sh = res.mean("squared_hellinger:fully_shared", H, n)
    dc = res.mean("squared_hellinger:decomposable", H, n)
    q = res.summary["cells"][f"fully_shared:H={H},n={n}"]["quantile"]
    print(f"H={H:<3d} shared mean {sh:.5f} (q90 {q:.5f})   decomposable mean {dc:.5f}")
