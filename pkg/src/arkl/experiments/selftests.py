"""Monte Carlo check of the one-sided Freedman consequences for ``[0, R]`` sequences.

Forward event:  ``sum X_t > (1+eps) sum E_{t-1} X_t + (R/eps) log(1/delta)``
Reverse event:  ``sum E_{t-1} X_t > (1+eps) sum X_t + ((1+eps)^2 R/eps) log(1/delta)``

Each should occur with probability at most ``delta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParam

SCENARIOS = ("deterministic", "iid_bernoulli", "adaptive_bernoulli", "adaptive_beta")


def simulate_adapted(
    scenario: str, R: float, T: int, trials: int, rng: np.random.Generator, p: float = 0.3
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(sum_t X_t, sum_t E_{t-1} X_t)`` for ``trials`` independent paths."""
    if scenario == "deterministic":
        x = np.full((trials, T), p * R)
        return x.sum(axis=1), x.sum(axis=1)
    if scenario == "iid_bernoulli":
        x = R * (rng.random((trials, T)) < p)
        return x.sum(axis=1), np.full(trials, T * p * R)
    sx = np.zeros(trials)
    sm = np.zeros(trials)
    prev = np.full(trials, p)
    for _ in range(T):
        # conditional mean depends on the previous draw, so the sequence is adapted but not i.i.d.
        mean = 0.1 + 0.8 * prev
        if scenario == "adaptive_bernoulli":
            x = (rng.random(trials) < mean).astype(np.float64)
        elif scenario == "adaptive_beta":
            conc = 4.0
            x = rng.beta(conc * mean, conc * (1 - mean))
        else:
            raise InvalidParam(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
        sx += R * x
        sm += R * mean
        prev = x
    return sx, sm


@dataclass(frozen=True)
class FreedmanReport:
    scenario: str
    direction: str
    R: float
    T: int
    eps: float
    delta: float
    trials: int
    violations: int

    @property
    def frequency(self) -> float:
        return self.violations / self.trials

    @property
    def threshold(self) -> float:
        return self.delta + 3 * math.sqrt(self.delta * (1 - self.delta) / self.trials)

    @property
    def passed(self) -> bool:
        return self.frequency <= self.threshold

    CSV_HEADER = ("scenario", "direction", "R", "T", "eps", "delta", "trials", "violations", "frequency", "threshold", "pass")

    def as_row(self) -> list:
        return [
            self.scenario, self.direction, format(self.R, ".17g"), self.T, format(self.eps, ".17g"),
            format(self.delta, ".17g"), self.trials, self.violations,
            format(self.frequency, ".17g"), format(self.threshold, ".17g"), str(self.passed).lower(),
        ]


def run_freedman_selftest(
    R: float,
    T: int,
    eps: float,
    delta: float,
    trials: int,
    rng: np.random.Generator,
    scenario: str = "iid_bernoulli",
    p: float = 0.3,
) -> tuple[FreedmanReport, FreedmanReport]:
    """Violation counts for the forward and reverse inequalities on simulated paths."""
    if R <= 0 or not 0 < eps < 1 or not 0 < delta < 1 or T < 1 or trials < 1:
        raise InvalidParam("need R > 0, eps in (0,1), delta in (0,1), T >= 1, trials >= 1")
    sx, sm = simulate_adapted(scenario, R, T, trials, rng, p)
    log_term = math.log(1 / delta)
    fwd = sx > (1 + eps) * sm + (R / eps) * log_term
    rev = sm > (1 + eps) * sx + ((1 + eps) ** 2 * R / eps) * log_term
    return (
        FreedmanReport(scenario, "forward", R, T, eps, delta, trials, int(fwd.sum())),
        FreedmanReport(scenario, "reverse", R, T, eps, delta, trials, int(rev.sum())),
    )
