"""Seeded sweeps over (H, n, trial) cells.

Every cell draws its own generator from ``SeedSequence([master, H, n, trial, salt])``
so results do not depend on execution order. Rows come back sorted by
``(H, n, trial)`` within each metric.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from ..ar_core import PolicyClass, Regime, SeqPolicy, sample_dataset
from ..divergences import joint_kl, squared_hellinger, total_variation
from ..errors import InvalidParam
from ..hard_instances import (
    fano_eps,
    make_bernoulli_instance,
    make_hadamard_family,
    make_misspecified_instance,
)
from ..learners import LEARNERS, Dataset, fit
from .slopes import SlopeFit, fit_loglog_slope

METRICS = ("joint_kl", "squared_hellinger", "tv", "excess_kl", "approx_ratio")
SLOPE_HALF_WIDTH = 0.3


def cell_seed(master: int, H: int, n: int, trial: int, salt: int = 0) -> int:
    ss = np.random.SeedSequence([int(master), int(H), int(n), int(trial), int(salt)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass
class SweepConfig:
    instance: dict = field(default_factory=lambda: {"construction": "fano", "m": 8, "G": 1.0})
    H: list = field(default_factory=lambda: [1, 2, 4, 8, 16])
    n: list = field(default_factory=lambda: [50, 100, 200, 400, 800])
    trials: int = 200
    learner: str = "erm"
    regime: str = "decomposable"
    metric: str = "joint_kl"
    seed: int = 0
    mc_samples: int | None = None
    out: str | None = None
    fixed_truth: bool = False
    delta: float = 0.1
    regimes: list = field(default_factory=lambda: ["fully_shared", "decomposable"])

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.instance, dict) or "construction" not in self.instance:
            raise InvalidParam("instance must be an object with a 'construction' key")
        for name in ("H", "n"):
            grid = getattr(self, name)
            if not isinstance(grid, list) or not grid or any(int(v) != v or v < 1 for v in grid):
                raise InvalidParam(f"{name} grid must be a nonempty list of positive integers")
        if int(self.trials) != self.trials or self.trials < 1:
            raise InvalidParam("trials must be a positive integer")
        if self.learner not in LEARNERS + ("oracle",):
            raise InvalidParam(f"unknown learner {self.learner!r}")
        if self.metric not in METRICS:
            raise InvalidParam(f"unknown metric {self.metric!r}")
        Regime(self.regime)
        for r in self.regimes:
            if Regime(r) is Regime.DEPENDENT:
                raise InvalidParam("hellinger comparison uses decomposable / fully_shared regimes")
        if not 0 < self.delta < 1:
            raise InvalidParam("delta must lie in (0, 1)")

    @classmethod
    def from_dict(cls, obj: dict) -> "SweepConfig":
        if not isinstance(obj, dict):
            raise InvalidParam("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise InvalidParam(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**obj)
        except (TypeError, ValueError) as exc:
            raise InvalidParam(str(exc)) from exc


@dataclass(frozen=True)
class SweepRow:
    H: int
    n: int
    trial: int
    seed: int
    metric: str
    value: float
    min_class_kl: float | None = None


@dataclass
class SweepResult:
    rows: list[SweepRow]
    slopes: list[SlopeFit] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def metrics(self) -> list[str]:
        return list(dict.fromkeys(r.metric for r in self.rows))

    def values(self, metric: str, H: int, n: int) -> np.ndarray:
        return np.array([r.value for r in self.rows if r.metric == metric and r.H == H and r.n == n])

    def cell_stats(self) -> dict:
        """``{(metric, H, n): {mean, median, q10, q90, count}}``."""
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r.metric, r.H, r.n), []).append(r.value)
        out = {}
        for key, vals in groups.items():
            v = np.asarray(vals)
            out[key] = {
                "mean": float(v.mean()),
                "median": float(np.median(v)),
                "q10": float(np.quantile(v, 0.1)),
                "q90": float(np.quantile(v, 0.9)),
                "count": int(v.size),
            }
        return out

    def mean(self, metric: str, H: int, n: int) -> float:
        return float(self.values(metric, H, n).mean())

    def to_csv(self) -> str:
        with_min = any(r.min_class_kl is not None for r in self.rows)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["H", "n", "trial", "seed", "metric", "value"] + (["min_class_kl"] if with_min else [])
        w.writerow(header)
        for r in self.rows:
            line = [r.H, r.n, r.trial, r.seed, r.metric, format(r.value, ".17g")]
            if with_min:
                line.append("" if r.min_class_kl is None else format(r.min_class_kl, ".17g"))
            w.writerow(line)
        return buf.getvalue()

    def slopes_json(self) -> str:
        return json.dumps([s.as_dict() for s in self.slopes], indent=1, sort_keys=True) + "\n"

    def summary_json(self) -> str:
        return json.dumps(self.summary, indent=1, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _metric_fn(metric: str) -> Callable[[SeqPolicy, SeqPolicy], float]:
    if metric == "joint_kl":
        return lambda p, q: joint_kl(p, q).value
    if metric == "squared_hellinger":
        return lambda p, q: squared_hellinger(p, q).value
    if metric == "tv":
        return lambda p, q: total_variation(p, q).value
    raise InvalidParam(f"metric {metric!r} is not a pairwise divergence")


def _grid(values) -> list[int]:
    return sorted({int(v) for v in values})


# ---------------------------------------------------------------------------
# estimation (Fano product instance, realizable)


def _fano_params(instance: dict) -> tuple[int, float, float | None]:
    if instance.get("construction") not in ("fano", "hadamard"):
        raise InvalidParam("this sweep needs a 'fano' instance")
    unknown = set(instance) - {"construction", "m", "G", "eps", "truth_index"}
    if unknown:
        raise InvalidParam(f"unknown instance keys: {sorted(unknown)}")
    m = int(instance.get("m", 8))
    G = float(instance.get("G", 1.0))
    eps = instance.get("eps")
    return m, G, None if eps is None else float(eps)


def _fano_truth(m: int, H: int, rng, regime: Regime, fixed: list | None) -> tuple[int, ...]:
    if fixed is not None:
        theta = [int(fixed[h % len(fixed)]) for h in range(H)]
    elif regime is Regime.FULLY_SHARED:
        theta = [int(rng.integers(m))] * H
    else:
        theta = [int(t) for t in rng.integers(0, m, size=H)]
    return tuple(theta)


def run_estimation_sweep(config: SweepConfig) -> SweepResult:
    """Joint-KL risk of a learner on realizable Fano product instances over the (H, n) grid.

    ``eps`` defaults to the rule ``(G/4) sqrt(log m / n)`` evaluated per ``n``.
    Fits risk-vs-H slopes (target 1) and risk-vs-n slopes (target -1).
    """
    m, G, eps_fixed = _fano_params(config.instance)
    regime = Regime(config.regime)
    if regime is Regime.DEPENDENT:
        raise InvalidParam("estimation sweeps use decomposable or fully_shared classes")
    metric = config.metric if config.metric != "excess_kl" else "joint_kl"
    div = _metric_fn(metric)
    fixed = None
    if config.fixed_truth:
        fixed = config.instance.get("truth_index", [0])
    rows = []
    eps_by_n = {}
    for H in _grid(config.H):
        for n in _grid(config.n):
            eps = eps_fixed if eps_fixed is not None else fano_eps(G, m, n)
            eps_by_n[n] = eps
            family = make_hadamard_family(m, eps)
            cls = PolicyClass(regime, H, base=family.members)
            for trial in range(config.trials):
                seed = cell_seed(config.seed, H, n, trial)
                rng = np.random.default_rng(seed)
                theta = _fano_truth(m, H, rng, regime, fixed)
                truth = SeqPolicy(tuple(family.members[t] for t in theta))
                data = Dataset(sample_dataset(truth, n, rng), family.d)
                if config.learner == "oracle":
                    est = truth
                else:
                    est = fit(config.learner, cls, data)
                rows.append(SweepRow(H, n, trial, seed, metric, div(truth, est)))
    result = SweepResult(rows)
    result.summary = {
        "experiment": "estimation",
        "m": m,
        "G": G,
        "d": make_hadamard_family(m, 0.0).d,
        "eps_by_n": {str(k): v for k, v in sorted(eps_by_n.items())},
        "learner": config.learner,
        "regime": regime.value,
    }
    result.slopes = _scaling_slopes(result, metric, _grid(config.H), _grid(config.n))
    return result


def _scaling_slopes(result: SweepResult, metric: str, Hs: list[int], ns: list[int]) -> list[SlopeFit]:
    fits = []
    if len(Hs) >= 3:
        for n in ns:
            pts = [(H, result.mean(metric, H, n)) for H in Hs]
            if all(y > 0 for _, y in pts):
                s, se = fit_loglog_slope(pts)
                fits.append(SlopeFit("H", s, se, (1 - SLOPE_HALF_WIDTH, 1 + SLOPE_HALF_WIDTH), {"n": n}, metric))
    if len(ns) >= 3:
        for H in Hs:
            pts = [(n, result.mean(metric, H, n)) for n in ns]
            if all(y > 0 for _, y in pts):
                s, se = fit_loglog_slope(pts)
                fits.append(SlopeFit("n", s, se, (-1 - SLOPE_HALF_WIDTH, -1 + SLOPE_HALF_WIDTH), {"H": H}, metric))
    return fits


# ---------------------------------------------------------------------------
# approximation (misspecified instances, ratio to the class optimum)


def _misspecified_for(instance: dict, H: int, n: int, regime: str, master: int):
    kind = instance.get("construction")
    if kind == "bernoulli":
        unknown = set(instance) - {"construction", "sign"}
        if unknown:
            raise InvalidParam(f"unknown instance keys: {sorted(unknown)}")
        inst = make_bernoulli_instance(n, H, instance.get("sign", 1), regime)
        return inst.truth, inst.policy_class, inst.min_class_kl()
    if kind == "random":
        allowed = {"construction", "d", "class_size", "perturbation", "context_free", "instance_seed", "floor"}
        unknown = set(instance) - allowed
        if unknown:
            raise InvalidParam(f"unknown instance keys: {sorted(unknown)}")
        # one instance per H, shared across n and trials
        iseed = int(instance.get("instance_seed", master))
        rng = np.random.default_rng(np.random.SeedSequence([iseed, H, 7919]))
        inst = make_misspecified_instance(
            H,
            int(instance.get("d", 3)),
            int(instance.get("class_size", 4)),
            float(instance.get("perturbation", 0.5)),
            rng,
            regime=regime,
            context_free=bool(instance.get("context_free", True)),
            floor=float(instance.get("floor", 0.05)),
        )
        return inst.truth, inst.policy_class, inst.min_class_kl
    raise InvalidParam("approximation sweeps need a 'bernoulli' or 'random' instance")


def run_approximation_sweep(config: SweepConfig) -> SweepResult:
    """Records ``KL(P* || P_hat)`` per trial next to ``min_{pi in class} KL(P* || P^pi)``.

    The per-cell approximation ratio is ``mean KL / min-class KL``; cells whose
    class optimum is zero (realizable) report the mean excess instead.
    """
    rows = []
    per_cell = {}
    for H in _grid(config.H):
        for n in _grid(config.n):
            truth, cls, mkl = _misspecified_for(config.instance, H, n, config.regime, config.seed)
            vals = []
            for trial in range(config.trials):
                seed = cell_seed(config.seed, H, n, trial)
                rng = np.random.default_rng(seed)
                data = Dataset(sample_dataset(truth, n, rng), truth.d)
                est = fit(config.learner, cls, data)
                kl = joint_kl(truth, est).value
                vals.append(kl)
                rows.append(SweepRow(H, n, trial, seed, "joint_kl", kl, mkl))
            mean_kl = float(np.mean(vals))
            realizable = mkl <= 1e-15
            per_cell[(H, n)] = {
                "mean_kl": mean_kl,
                "min_class_kl": mkl,
                "ratio": None if realizable else mean_kl / mkl,
                "excess": mean_kl - mkl,
            }
    summary = {"experiment": "approximation", "instance": config.instance, "learner": config.learner, "cells": {}}
    for (H, n), c in per_cell.items():
        summary["cells"][f"H={H},n={n}"] = c
    for n in _grid(config.n):
        ratios = [per_cell[(H, n)]["ratio"] for H in _grid(config.H)]
        if all(r is not None for r in ratios):
            summary.setdefault("by_n", {})[str(n)] = {
                "max_ratio": max(ratios),
                "min_ratio": min(ratios),
                "spread": max(ratios) / min(ratios),
            }
    return SweepResult(rows, [], summary)


# ---------------------------------------------------------------------------
# Hellinger: fully-shared versus decomposable


def hellinger_bound(class_size: int, delta: float, n: int) -> float:
    """``2 log(|Pi| / delta) / n`` with ``log|Pi|`` evaluated without overflow."""
    return 2 * (math.log(class_size) + math.log(1 / delta)) / n


def run_hellinger_comparison(config: SweepConfig) -> SweepResult:
    """Squared-Hellinger risk of ERM in each regime on the same realizable data.

    The truth is a fully-shared Hadamard member (so it lies in both classes).
    Each trial's data are reused across regimes.
    """
    m, G, eps = _fano_params(config.instance)
    if eps is None:
        raise InvalidParam("the Hellinger comparison needs a fixed 'eps' in the instance")
    family = make_hadamard_family(m, eps)
    regimes = [Regime(r) for r in config.regimes]
    rows = []
    for H in _grid(config.H):
        for n in _grid(config.n):
            classes = {r: PolicyClass(r, H, base=family.members) for r in regimes}
            for trial in range(config.trials):
                seed = cell_seed(config.seed, H, n, trial)
                rng = np.random.default_rng(seed)
                j = int(rng.integers(m))
                truth = SeqPolicy.shared(family.members[j], H)
                data = Dataset(sample_dataset(truth, n, rng), family.d)
                for r in regimes:
                    est = truth if config.learner == "oracle" else fit(config.learner, classes[r], data)
                    rows.append(SweepRow(H, n, trial, seed, f"squared_hellinger:{r.value}", squared_hellinger(est, truth).value))
    rows.sort(key=lambda r: (r.metric, r.H, r.n, r.trial))
    result = SweepResult(rows)
    stats = result.cell_stats()
    summary = {"experiment": "hellinger", "m": m, "eps": eps, "d": family.d, "delta": config.delta, "cells": {}}
    for (metric, H, n), st in stats.items():
        regime = Regime(metric.split(":", 1)[1])
        log_size = H * math.log(m) if regime is Regime.DECOMPOSABLE else math.log(m)
        bound = 2 * (log_size + math.log(1 / config.delta)) / n
        q = float(np.quantile(result.values(metric, H, n), 1 - config.delta))
        summary["cells"][f"{regime.value}:H={H},n={n}"] = {
            **st,
            "quantile": q,
            "bound": bound,
            "within_bound": q <= bound,
        }
    result.summary = summary
    return result


# ---------------------------------------------------------------------------
# no sharp oracle inequality (Bernoulli instance)


def run_no_sharp_oracle_experiment(
    n_grid, trials: int, learner: str = "erm", *, H: int = 1, regime: str = "decomposable", seed: int = 0
) -> SweepResult:
    """Frequency, per sign, that the learner's excess KL reaches the per-step gap ``2b log 3``.

    ``learner="oracle"`` always returns the class optimum (a control arm).
    """
    if learner not in LEARNERS + ("oracle",):
        raise InvalidParam(f"unknown learner {learner!r}")
    rows = []
    freq = {}
    for n in _grid(n_grid):
        by_sign = {}
        for salt, sign in ((1, +1), (2, -1)):
            inst = make_bernoulli_instance(n, H, sign, regime)
            mkl = inst.min_class_kl()
            best = SeqPolicy.shared(inst.base[inst.best_index], H)
            hits = 0
            for trial in range(trials):
                s = cell_seed(seed, H, n, trial, salt)
                rng = np.random.default_rng(s)
                if learner == "oracle":
                    est = best
                else:
                    data = Dataset(sample_dataset(inst.truth, n, rng), 2)
                    est = fit(learner, inst.policy_class, data)
                excess = joint_kl(inst.truth, est).value - mkl
                hits += excess >= inst.gap_per_step - 1e-12
                rows.append(SweepRow(H, n, trial, s, f"excess_kl:{'+' if sign > 0 else '-'}", excess, mkl))
            by_sign["+" if sign > 0 else "-"] = hits / trials
        freq[str(n)] = {
            "by_sign": by_sign,
            "max_over_signs": max(by_sign.values()),
            "gap_per_step": 2 * (1 / (10 * math.sqrt(n))) * math.log(3),
        }
    rows.sort(key=lambda r: (r.metric, r.H, r.n, r.trial))
    summary = {"experiment": "no_sharp_oracle", "learner": learner, "H": H, "regime": regime, "frequencies": freq}
    return SweepResult(rows, [], summary)
