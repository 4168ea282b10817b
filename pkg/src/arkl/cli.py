"""Command line entry point.

Subcommands: ``estimation``, ``approximation``, ``hellinger``, ``no-sharp-oracle``,
``freedman``, ``divergence`` and ``instance``. Each reads a JSON config; the
``--seed``, ``--out``, ``--cap`` and ``--mc-samples`` flags override it.

Exit codes: 0 on success, 2 on an invalid config or argument, 3 when exact
enumeration would exceed the cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as arkl_io
from .ar_core import PolicyClass, SeqPolicy
from .divergences import joint_kl, joint_kl_monte_carlo, squared_hellinger, total_variation
from .errors import ArklError, CapExceeded, InvalidParam
from .experiments import (
    SCENARIOS,
    FreedmanReport,
    SweepConfig,
    SweepResult,
    run_approximation_sweep,
    run_estimation_sweep,
    run_freedman_selftest,
    run_hellinger_comparison,
    run_no_sharp_oracle_experiment,
)
from .hard_instances import (
    make_bernoulli_instance,
    make_dependent_instance,
    make_fano_instance,
    make_hadamard_family,
    make_misspecified_instance,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_CAP = 3

SWEEPS = {
    "estimation": run_estimation_sweep,
    "approximation": run_approximation_sweep,
    "hellinger": run_hellinger_comparison,
}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidParam(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParam(f"invalid JSON in {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise InvalidParam("config must be a JSON object")
    return obj


def _check_keys(cfg: dict, allowed: set[str]) -> None:
    unknown = set(cfg) - allowed
    if unknown:
        raise InvalidParam(f"unknown config keys: {sorted(unknown)}")


def _sibling(out: str, suffix: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + suffix)


def _write(out: str | None, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", newline="\n") as fh:
        fh.write(text)


def _emit_sweep(result: SweepResult, out: str | None) -> None:
    _write(out, result.to_csv())
    if out is not None:
        _write(str(_sibling(out, ".slopes.json")), result.slopes_json())
        _write(str(_sibling(out, ".summary.json")), result.summary_json())


def _cmd_sweep(args, cfg: dict) -> int:
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.mc_samples is not None:
        cfg["mc_samples"] = args.mc_samples
    if args.fixed_truth:
        cfg["fixed_truth"] = True
    out = args.out if args.out is not None else cfg.get("out")
    config = SweepConfig.from_dict(cfg)
    _emit_sweep(SWEEPS[args.command](config), out)
    return EXIT_OK


def _cmd_no_sharp_oracle(args, cfg: dict) -> int:
    _check_keys(cfg, {"n", "trials", "learner", "H", "regime", "seed", "out"})
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    n_grid = cfg.get("n", [100, 400])
    if not isinstance(n_grid, list) or not n_grid:
        raise InvalidParam("n must be a nonempty list")
    trials = int(cfg.get("trials", 2000))
    if trials < 1:
        raise InvalidParam("trials must be >= 1")
    result = run_no_sharp_oracle_experiment(
        n_grid, trials, cfg.get("learner", "erm"), H=int(cfg.get("H", 1)), regime=cfg.get("regime", "decomposable"), seed=seed
    )
    _emit_sweep(result, args.out if args.out is not None else cfg.get("out"))
    return EXIT_OK


def _as_list(x) -> list:
    return x if isinstance(x, list) else [x]


def _cmd_freedman(args, cfg: dict) -> int:
    _check_keys(cfg, {"R", "T", "eps", "delta", "trials", "scenario", "p", "seed", "out"})
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    scenarios = _as_list(cfg.get("scenario", list(SCENARIOS)))
    deltas = _as_list(cfg.get("delta", [0.05, 0.01]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FreedmanReport.CSV_HEADER)
    for i, scenario in enumerate(scenarios):
        for j, delta in enumerate(deltas):
            rng = np.random.default_rng(np.random.SeedSequence([seed, i, j]))
            for rep in run_freedman_selftest(
                float(cfg.get("R", 1.0)), int(cfg.get("T", 200)), float(cfg.get("eps", 0.5)), float(delta),
                int(cfg.get("trials", 10_000)), rng, scenario, float(cfg.get("p", 0.3)),
            ):
                w.writerow(rep.as_row())
    _write(args.out if args.out is not None else cfg.get("out"), buf.getvalue())
    return EXIT_OK


def _policy_arg(value, base: Path | None) -> SeqPolicy:
    if isinstance(value, str):
        path = Path(value)
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            value = json.loads(path.read_text())
        except OSError as exc:
            raise InvalidParam(f"cannot read policy {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidParam(f"invalid JSON in {path}: {exc}") from exc
    pol = arkl_io.from_obj(value)
    if not isinstance(pol, SeqPolicy):
        raise InvalidParam("divergence inputs must be policies")
    return pol


def _cmd_divergence(args, cfg: dict) -> int:
    _check_keys(cfg, {"p", "q", "metrics", "mc_samples", "seed", "out"})
    if "p" not in cfg or "q" not in cfg:
        raise InvalidParam("divergence config needs 'p' and 'q' (policy objects or file paths)")
    base = Path(args.config).parent if args.config else None
    p, q = _policy_arg(cfg["p"], base), _policy_arg(cfg["q"], base)
    metrics = _as_list(cfg.get("metrics", ["joint_kl", "squared_hellinger", "tv"]))
    mc = args.mc_samples if args.mc_samples is not None else cfg.get("mc_samples")
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    fns = {"joint_kl": joint_kl, "squared_hellinger": squared_hellinger, "tv": total_variation}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("metric", "value", "method", "mc_samples", "mc_stderr"))
    for name in metrics:
        if name not in fns:
            raise InvalidParam(f"unknown metric {name!r}")
        try:
            rep = fns[name](p, q)
        except CapExceeded:
            if name != "joint_kl" or not mc:
                raise
            rep = joint_kl_monte_carlo(p, q, int(mc), np.random.default_rng(seed))
        w.writerow((name, *rep.as_row()))
    _write(args.out if args.out is not None else cfg.get("out"), buf.getvalue())
    return EXIT_OK


def build_instance(inst_cfg: dict, seed: int = 0) -> tuple[PolicyClass, SeqPolicy | None, dict]:
    """Build ``(class, truth, manifest)`` from an instance config."""
    kind = inst_cfg.get("construction")
    p = {k: v for k, v in inst_cfg.items() if k != "construction"}
    if kind in ("fano", "hadamard"):
        _check_keys(p, {"H", "m", "eps", "G", "n", "truth_index"})
        H, m = int(p.get("H", 1)), int(p.get("m", 8))
        if "eps" not in p and "n" not in p:
            raise InvalidParam("fano instances need 'eps' or 'n'")
        inst = make_fano_instance(
            H, m, p.get("eps"), p.get("truth_index"), np.random.default_rng(seed),
            G=float(p.get("G", 1.0)), n=p.get("n"), seed=seed,
        )
        return inst.policy_class, inst.truth, inst.manifest()
    if kind == "bernoulli":
        _check_keys(p, {"n", "H", "sign", "regime"})
        if "n" not in p:
            raise InvalidParam("bernoulli instances need 'n'")
        inst = make_bernoulli_instance(int(p["n"]), int(p.get("H", 1)), p.get("sign", 1), p.get("regime", "decomposable"))
        return inst.policy_class, inst.truth, inst.manifest()
    if kind == "dependent":
        _check_keys(p, {"H", "M", "G", "n", "eps"})
        inst = make_dependent_instance(int(p.get("H", 1)), int(p.get("M", 8)), float(p.get("G", 1.0)), int(p.get("n", 100)), p.get("eps"))
        return inst.policy_class, None, inst.manifest()
    if kind == "random":
        _check_keys(p, {"H", "d", "class_size", "perturbation", "regime", "context_free", "floor"})
        inst = make_misspecified_instance(
            int(p.get("H", 2)), int(p.get("d", 3)), int(p.get("class_size", 4)), float(p.get("perturbation", 0.5)),
            np.random.default_rng(seed), regime=p.get("regime", "decomposable"),
            context_free=bool(p.get("context_free", False)), floor=float(p.get("floor", 0.05)), seed=seed,
        )
        return inst.policy_class, inst.truth, inst.manifest()
    if kind == "hadamard_family":
        _check_keys(p, {"m", "eps"})
        fam = make_hadamard_family(int(p.get("m", 8)), float(p.get("eps", 0.5)))
        return PolicyClass.decomposable(fam.members, 1), None, fam.manifest()
    raise InvalidParam(f"unknown construction {kind!r}")


def _cmd_instance(args, cfg: dict) -> int:
    seed = args.seed if args.seed is not None else int(cfg.pop("seed", 0))
    cfg.pop("seed", None)
    out = args.out if args.out is not None else cfg.pop("out", None)
    cfg.pop("out", None)
    cls, truth, manifest = build_instance(cfg, seed)
    manifest = {**manifest, "class_size": str(cls.size), "regime": cls.regime.value}
    _write(out, arkl_io.dumps(cls))
    if out is not None:
        if truth is not None:
            _write(str(_sibling(out, ".truth.json")), arkl_io.dumps(truth))
        _write(str(_sibling(out, ".manifest.json")), json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


COMMANDS = {
    "estimation": _cmd_sweep,
    "approximation": _cmd_sweep,
    "hellinger": _cmd_sweep,
    "no-sharp-oracle": _cmd_no_sharp_oracle,
    "freedman": _cmd_freedman,
    "divergence": _cmd_divergence,
    "instance": _cmd_instance,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="arkl", description="Joint-KL learning experiments on tabular autoregressive policies.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--out", help="output path; stdout when omitted")
        sp.add_argument("--cap", type=int, help="enumeration cap (sets ARKL_CAP)")
        sp.add_argument("--mc-samples", type=int, dest="mc_samples", help="Monte Carlo budget when the cap is hit")
        if name == "estimation":
            sp.add_argument("--fixed-truth", action="store_true", dest="fixed_truth", help="use instance.truth_index for every trial")
        else:
            sp.set_defaults(fixed_truth=False)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    old_cap = os.environ.get("ARKL_CAP")
    try:
        if args.cap is not None:
            if args.cap < 1:
                raise InvalidParam("--cap must be positive")
            os.environ["ARKL_CAP"] = str(args.cap)
        cfg = _load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except CapExceeded as exc:
        print(f"arkl: enumeration cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ArklError, ValueError) as exc:
        print(f"arkl: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    finally:
        if args.cap is not None:
            if old_cap is None:
                os.environ.pop("ARKL_CAP", None)
            else:
                os.environ["ARKL_CAP"] = old_cap


cli_main = main
