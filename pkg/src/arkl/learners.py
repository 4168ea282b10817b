"""Log-loss learners: ERM over a class, stepwise (lifted) ERM, and the per-step
exponential-weights posterior with its mixture predictor.

All learners see only the class and the data. Ties in empirical loss are broken
towards the lowest base or member index; two losses count as tied when they
agree to ``TIE_RTOL`` relative precision, so a reordered floating-point sum
cannot flip the choice.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .ar_core import (
    PolicyClass,
    Regime,
    SeqPolicy,
    StepKind,
    StepPolicy,
    check_cap,
    class_members,
    log_joint_probs_batch,
    prefix_index,
)
from .errors import InvalidParam, ZeroProbability

TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` trajectories stored as an ``(n, H)`` integer array."""

    tokens: np.ndarray
    d: int

    def __post_init__(self):
        toks = np.asarray(self.tokens, dtype=np.int64)
        if toks.ndim != 2 or toks.shape[1] < 1:
            raise InvalidParam("tokens must be an (n, H) array with H >= 1")
        if toks.size and (toks.min() < 0 or toks.max() >= self.d):
            raise InvalidParam("token outside the alphabet")
        toks = toks.copy()
        toks.setflags(write=False)
        object.__setattr__(self, "tokens", toks)

    @classmethod
    def empty(cls, H: int, d: int) -> "Dataset":
        return cls(np.zeros((0, H), dtype=np.int64), d)

    @property
    def n(self) -> int:
        return self.tokens.shape[0]

    @property
    def horizon(self) -> int:
        return self.tokens.shape[1]

    def trajectories(self) -> list[tuple[int, ...]]:
        return [tuple(int(u) for u in row) for row in self.tokens]


@dataclass(frozen=True, eq=False)
class PosteriorWeights:
    """Per-step posterior over the base list; ``weights[h, j]`` is the weight on base member ``j``."""

    weights: np.ndarray

    def step(self, h: int) -> list[tuple[int, float]]:
        return [(j, float(w)) for j, w in enumerate(self.weights[h])]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "member_index", "weight"])
        for h, row in enumerate(self.weights):
            for j, val in enumerate(row):
                w.writerow([h, j, format(float(val), ".17g")])
        return buf.getvalue()


def _check_data(data: Dataset, H: int, d: int) -> None:
    if data.horizon != H or data.d != d:
        raise InvalidParam(f"data shape (H={data.horizon}, d={data.d}) does not match (H={H}, d={d})")


def _argmin_lowest(losses: np.ndarray) -> int:
    lo = float(np.min(losses))
    tol = TIE_RTOL * max(1.0, abs(lo))
    return int(np.flatnonzero(losses <= lo + tol)[0])


def step_log_likelihoods(base: Sequence[StepPolicy], data: Dataset, h: int) -> np.ndarray:
    """``sum_i log pi(u_h^i | u_<h^i)`` for each base policy, via (prefix, token) counts."""
    toks = data.tokens
    d = data.d
    out = np.empty(len(base))
    if data.n == 0:
        out[:] = 0.0
        return out
    cf_counts = None
    pair_idx = pair_counts = None
    for j, pol in enumerate(base):
        if pol.kind is StepKind.CONTEXT_FREE:
            if cf_counts is None:
                cf_counts = np.bincount(toks[:, h], minlength=d).astype(np.float64)
            live = cf_counts > 0
            row = pol.context_free_row
            if np.any(row[live] <= 0):
                raise ZeroProbability(f"base policy {j} gives zero probability to an observed token at step {h}")
            out[j] = float(np.dot(cf_counts[live], np.log(row[live])))
        else:
            if pair_idx is None:
                flat = prefix_index(toks[:, :h], d) * d + toks[:, h]
                pair_idx, pair_counts = np.unique(flat, return_counts=True)
            probs = pol.rows_for_length(h).reshape(-1)[pair_idx]
            if np.any(probs <= 0):
                raise ZeroProbability(f"base policy {j} gives zero probability to an observed token at step {h}")
            out[j] = float(np.dot(pair_counts.astype(np.float64), np.log(probs)))
    return out


def empirical_log_loss(policy: SeqPolicy, data: Dataset) -> float:
    """``-(1/n) sum_i sum_h log pi_h(u_h^i | u_<h^i)``."""
    _check_data(data, policy.horizon, policy.d)
    if data.n == 0:
        raise InvalidParam("empirical loss of an empty dataset is undefined")
    return float(-np.mean(log_joint_probs_batch(policy, data.tokens)))


def stepwise_erm_indices(base: Sequence[StepPolicy], data: Dataset, H: int) -> list[int]:
    if not base:
        raise InvalidParam("base class must be nonempty")
    _check_data(data, H, base[0].d)
    return [_argmin_lowest(-step_log_likelihoods(base, data, h)) for h in range(H)]


def stepwise_erm(base: Sequence[StepPolicy], data: Dataset, H: int) -> SeqPolicy:
    """Independent per-step ERM over the base list; the output lies in ``base**H``."""
    idx = stepwise_erm_indices(base, data, H)
    return SeqPolicy(tuple(base[j] for j in idx))


def _member_losses(cls: PolicyClass, data: Dataset, cap: int | None) -> np.ndarray:
    if cls.regime is Regime.FULLY_SHARED:
        ll = sum(step_log_likelihoods(cls.base, data, h) for h in range(cls.horizon))
        return -np.asarray(ll)
    members = list(class_members(cls, cap))
    check_cap(len(members) * cls.horizon, cap, "member-steps")
    # group identical step objects so each one is scored once per step
    losses = np.zeros(len(members))
    for h in range(cls.horizon):
        distinct = {}
        for m in members:
            distinct.setdefault(id(m.steps[h]), m.steps[h])
        keys = list(distinct)
        ll = step_log_likelihoods([distinct[k] for k in keys], data, h)
        lookup = dict(zip(keys, ll))
        losses -= np.array([lookup[id(m.steps[h])] for m in members])
    return losses


def erm_index(cls: PolicyClass, data: Dataset, cap: int | None = None) -> int | list[int]:
    """Index of the ERM choice: a list of base indices (decomposable) or one member/base index."""
    _check_data(data, cls.horizon, cls.d)
    if cls.regime is Regime.DECOMPOSABLE:
        return stepwise_erm_indices(cls.base, data, cls.horizon)
    return _argmin_lowest(_member_losses(cls, data, cap))


def erm(cls: PolicyClass, data: Dataset, cap: int | None = None) -> SeqPolicy:
    """A minimizer of the empirical negative log-likelihood over the class (lowest index on ties)."""
    idx = erm_index(cls, data, cap)
    if cls.regime is Regime.DECOMPOSABLE:
        return SeqPolicy(tuple(cls.base[j] for j in idx))
    if cls.regime is Regime.FULLY_SHARED:
        return SeqPolicy.shared(cls.base[idx], cls.horizon)
    return cls.members[idx]


# ---------------------------------------------------------------------------
# Bayesian posterior


def _prior_vector(prior, k: int) -> np.ndarray:
    if prior is None:
        return np.full(k, 1.0 / k)
    prior = np.asarray(prior, dtype=np.float64)
    if prior.shape != (k,) or np.any(prior <= 0) or abs(prior.sum() - 1.0) > 1e-12:
        raise InvalidParam("prior must be a strictly positive probability vector over the base")
    return prior


def posterior_weights(
    base: Sequence[StepPolicy], data: Dataset, H: int, prior=None
) -> PosteriorWeights:
    """``q_h(pi) ∝ prior(pi) prod_i pi(u_h^i | u_<h^i)`` for each step, normalized in log space."""
    if not base:
        raise InvalidParam("base class must be nonempty")
    _check_data(data, H, base[0].d)
    log_prior = np.log(_prior_vector(prior, len(base)))
    W = np.empty((H, len(base)))
    for h in range(H):
        logits = log_prior + step_log_likelihoods(base, data, h)
        W[h] = np.exp(logits - logsumexp(logits))
        W[h] /= W[h].sum()
    W.setflags(write=False)
    return PosteriorWeights(W)


def mix_step_policies(policies: Sequence[StepPolicy], weights: np.ndarray, max_prefix_len: int) -> StepPolicy:
    """Row-wise mixture ``sum_j w_j pi_j(.|s)``, materialized at every prefix up to ``max_prefix_len``."""
    weights = np.asarray(weights, dtype=np.float64)
    if all(p.kind is StepKind.CONTEXT_FREE for p in policies):
        row = sum(w * p.context_free_row for w, p in zip(weights, policies))
        return StepPolicy.context_free(row / row.sum())
    check_cap(policies[0].d ** max_prefix_len, None, "prefixes")
    tables = []
    for L in range(max_prefix_len + 1):
        block = sum(w * np.asarray(p.rows_for_length(L)) for w, p in zip(weights, policies))
        tables.append(block / block.sum(axis=1, keepdims=True))
    return StepPolicy.tabular(tables)


def bayes_posterior(
    base: Sequence[StepPolicy], data: Dataset, H: int, prior=None
) -> tuple[SeqPolicy, PosteriorWeights]:
    """Per-step exponential-weights posterior (rate 1) and its mixture predictor.

    The predictor is generally not a member of any class built from ``base``.
    """
    post = posterior_weights(base, data, H, prior)
    steps = []
    for h in range(H):
        w = post.weights[h]
        if np.count_nonzero(w) == 1:
            steps.append(base[int(np.flatnonzero(w)[0])])
        else:
            steps.append(mix_step_policies(base, w, h))
    return SeqPolicy(tuple(steps)), post


def bayes_mode(cls: PolicyClass, data: Dataset, prior=None, cap: int | None = None) -> SeqPolicy:
    """Proper selection: the posterior mode in the class (per step for decomposable classes)."""
    _check_data(data, cls.horizon, cls.d)
    if cls.regime is Regime.DECOMPOSABLE:
        log_prior = np.log(_prior_vector(prior, len(cls.base)))
        idx = [
            _argmin_lowest(-(log_prior + step_log_likelihoods(cls.base, data, h)))
            for h in range(cls.horizon)
        ]
        return SeqPolicy(tuple(cls.base[j] for j in idx))
    k = len(cls.base) if cls.regime is Regime.FULLY_SHARED else len(cls.members)
    log_prior = np.log(_prior_vector(prior, k))
    j = _argmin_lowest(_member_losses(cls, data, cap) - log_prior)
    if cls.regime is Regime.FULLY_SHARED:
        return SeqPolicy.shared(cls.base[j], cls.horizon)
    return cls.members[j]


def mixability_gaps(base: Sequence[StepPolicy], data: Dataset, H: int, prior=None) -> np.ndarray:
    """``(H, |base|)`` array of ``loss(pi) + log(1/prior(pi)) - loss(predictor)`` per step."""
    prior_v = _prior_vector(prior, len(base))
    predictor, _ = bayes_posterior(base, data, H, prior_v)
    gaps = np.empty((H, len(base)))
    for h in range(H):
        pred_loss = -step_log_likelihoods([predictor.steps[h]], data, h)[0]
        base_loss = -step_log_likelihoods(base, data, h)
        gaps[h] = base_loss - np.log(prior_v) - pred_loss
    return gaps


def mixability_check(base: Sequence[StepPolicy], data: Dataset, H: int, prior=None, slack: float = 1e-9) -> bool:
    """True iff the mixture predictor's in-sample loss is within ``log(1/prior)`` of every expert, per step."""
    return bool(np.all(mixability_gaps(base, data, H, prior) >= -slack))


LEARNERS = ("erm", "stepwise_erm", "bayes_posterior", "bayes_mode")


def fit(learner: str, cls: PolicyClass, data: Dataset, prior=None, cap: int | None = None) -> SeqPolicy:
    """Dispatch by learner name; lifted learners use the marginal union of a dependent class."""
    if learner == "erm":
        return erm(cls, data, cap)
    if learner == "stepwise_erm":
        return stepwise_erm(cls.marginal_union(), data, cls.horizon)
    if learner == "bayes_posterior":
        return bayes_posterior(cls.marginal_union(), data, cls.horizon, prior)[0]
    if learner == "bayes_mode":
        return bayes_mode(cls, data, prior, cap)
    raise InvalidParam(f"unknown learner {learner!r}; expected one of {LEARNERS}")
