"""Rollout returns and regret against an expert policy.

Rewards are functions of whole trajectories. The worst-case regret over
rewards with values in ``[0, 1]`` equals the joint total variation; the
indicator of ``{P* >= P_hat}`` attains it. Rewards with values in ``[-1, 1]``
can reach twice that.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .ar_core import SeqPolicy, check_cap, enumerate_trajectories, joint_log_law, sample_dataset
from .errors import CapExceeded, InvalidParam


def _traj_key(traj) -> str:
    return " ".join(str(int(u)) for u in traj)


@dataclass(frozen=True, eq=False)
class RewardFn:
    """Trajectory reward stored as a dense vector in lexicographic trajectory order."""

    values: np.ndarray
    H: int
    d: int
    kind: str = "tabular"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64).copy()
        if vals.shape != (self.d**self.H,):
            raise InvalidParam(f"reward needs {self.d ** self.H} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)) or np.any(np.abs(vals) > 1.0):
            raise InvalidParam("rewards must satisfy |r| <= 1")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, c: float, H: int, d: int) -> "RewardFn":
        return cls(np.full(d**H, float(c)), H, d, "constant")

    @classmethod
    def random(cls, H: int, d: int, rng: np.random.Generator, low: float = -1.0, high: float = 1.0) -> "RewardFn":
        check_cap(d**H, None, "trajectories")
        return cls(rng.uniform(low, high, size=d**H), H, d, "random")

    @classmethod
    def from_mapping(cls, mapping: dict, H: int, d: int, default: float = 0.0) -> "RewardFn":
        vals = np.full(d**H, float(default))
        for traj, v in mapping.items():
            traj = tuple(int(u) for u in traj)
            if len(traj) != H or any(not 0 <= u < d for u in traj):
                raise InvalidParam(f"bad trajectory {traj} for H={H}, d={d}")
            idx = 0
            for u in traj:
                idx = idx * d + u
            vals[idx] = float(v)
        return cls(vals, H, d)

    @classmethod
    def from_csv(cls, text: str, H: int, d: int, default: float = 0.0) -> "RewardFn":
        """Parse ``trajectory,value`` rows; trajectories are space-separated token strings."""
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["trajectory", "value"]:
            raise InvalidParam("reward CSV must start with the header 'trajectory,value'")
        mapping = {}
        for row in rows[1:]:
            if not row:
                continue
            if len(row) != 2:
                raise InvalidParam(f"malformed reward row {row}")
            mapping[tuple(int(t) for t in row[0].split())] = float(row[1])
        return cls.from_mapping(mapping, H, d, default)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trajectory", "value"])
        for traj, v in zip(enumerate_trajectories(self.H, self.d), self.values):
            w.writerow([_traj_key(traj), format(float(v), ".17g")])
        return buf.getvalue()

    def __call__(self, traj) -> float:
        idx = 0
        for u in traj:
            idx = idx * self.d + int(u)
        return float(self.values[idx])

    def scaled(self, lam: float) -> "RewardFn":
        return RewardFn(self.values * lam, self.H, self.d, self.kind)

    @property
    def span(self) -> float:
        return float(self.values.max() - self.values.min())


def _check(policy: SeqPolicy, reward: RewardFn) -> None:
    if policy.horizon != reward.H or policy.d != reward.d:
        raise InvalidParam("policy and reward disagree on horizon or alphabet")


def expected_return(
    policy: SeqPolicy,
    reward: RewardFn,
    cap: int | None = None,
    mc_samples: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """``J(pi; r) = E_{tau ~ P^pi} r(tau)``, exact under the cap, else Monte Carlo if a budget is given."""
    _check(policy, reward)
    try:
        p = np.exp(joint_log_law(policy, cap))
    except CapExceeded:
        if not mc_samples:
            raise
        if rng is None:
            raise InvalidParam("Monte Carlo returns need an rng")
        toks = sample_dataset(policy, mc_samples, rng)
        return float(np.mean([reward(t) for t in toks]))
    return float(np.dot(p, reward.values))


def regret(pi_star: SeqPolicy, pi_hat: SeqPolicy, reward: RewardFn, cap: int | None = None) -> float:
    """``J(pi*; r) - J(pi_hat; r)`` computed from the joint law difference."""
    _check(pi_star, reward)
    _check(pi_hat, reward)
    diff = np.exp(joint_log_law(pi_star, cap)) - np.exp(joint_log_law(pi_hat, cap))
    return float(np.dot(diff, reward.values))


def worst_case_regret(pi_star: SeqPolicy, pi_hat: SeqPolicy, cap: int | None = None) -> tuple[float, RewardFn]:
    """Supremum of regret over ``[0, 1]``-valued rewards, with the maximizing reward.

    The maximizer is ``1`` where ``P*(tau) >= P_hat(tau)`` and ``0`` elsewhere,
    and the supremum equals ``TV(P*, P_hat)``. Computed from that maximizer so
    the two agree bit for bit.
    """
    if pi_star.horizon != pi_hat.horizon or pi_star.d != pi_hat.d:
        raise InvalidParam("policies disagree on horizon or alphabet")
    diff = np.exp(joint_log_law(pi_star, cap)) - np.exp(joint_log_law(pi_hat, cap))
    best = RewardFn((diff >= 0).astype(np.float64), pi_star.horizon, pi_star.d, "extremal")
    return float(np.dot(diff, best.values)), best


def signed_extremal_reward(pi_star: SeqPolicy, pi_hat: SeqPolicy, cap: int | None = None) -> RewardFn:
    """``+1`` where ``P* >= P_hat``, ``-1`` elsewhere; its regret is ``2 TV``."""
    diff = np.exp(joint_log_law(pi_star, cap)) - np.exp(joint_log_law(pi_hat, cap))
    return RewardFn(np.where(diff >= 0, 1.0, -1.0), pi_star.horizon, pi_star.d, "extremal_signed")
