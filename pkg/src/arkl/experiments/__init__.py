"""Sweep harness, slope fits and concentration self-tests."""

from .selftests import SCENARIOS, FreedmanReport, run_freedman_selftest, simulate_adapted
from .slopes import SlopeFit, fit_loglog_slope
from .sweeps import (
    METRICS,
    SweepConfig,
    SweepResult,
    SweepRow,
    cell_seed,
    hellinger_bound,
    run_approximation_sweep,
    run_estimation_sweep,
    run_hellinger_comparison,
    run_no_sharp_oracle_experiment,
)

__all__ = [
    "METRICS",
    "SCENARIOS",
    "FreedmanReport",
    "SlopeFit",
    "SweepConfig",
    "SweepResult",
    "SweepRow",
    "cell_seed",
    "fit_loglog_slope",
    "hellinger_bound",
    "run_approximation_sweep",
    "run_estimation_sweep",
    "run_freedman_selftest",
    "run_hellinger_comparison",
    "run_no_sharp_oracle_experiment",
    "simulate_adapted",
]
