"""Joint and conditional divergences between sequence laws.

Everything is in nats. Exact routines enumerate all ``d**H`` trajectories (or
all prefixes, for the chain-rule forms) and therefore respect the enumeration
cap; product-form shortcuts apply when both policies are context-free at every
step, in which case the joint law is a product of per-step marginals.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .ar_core import (
    SeqPolicy,
    StepPolicy,
    check_cap,
    joint_log_law,
    log_joint_probs_batch,
    prefix_log_laws,
    sample_dataset,
)
from .errors import InvalidParam, SupportViolation, ZeroProbability


class Method(str, Enum):
    EXACT_ENUMERATION = "ExactEnumeration"
    CHAIN_RULE = "ChainRule"
    MONTE_CARLO = "MonteCarlo"
    PRODUCT_FORM = "ProductForm"


@dataclass(frozen=True)
class DivergenceReport:
    value: float
    method: Method
    mc_samples: int | None = None
    mc_stderr: float | None = None

    CSV_HEADER = ("value", "method", "mc_samples", "mc_stderr")

    def as_row(self) -> list[str]:
        return [
            format(self.value, ".17g"),
            self.method.value,
            "" if self.mc_samples is None else str(self.mc_samples),
            "" if self.mc_stderr is None else format(self.mc_stderr, ".17g"),
        ]

    def __float__(self):
        return float(self.value)


def reports_to_csv(reports: Sequence[DivergenceReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DivergenceReport.CSV_HEADER)
    for r in reports:
        w.writerow(r.as_row())
    return buf.getvalue()


def _check_shapes(p: SeqPolicy, q: SeqPolicy) -> None:
    if p.horizon != q.horizon or p.d != q.d:
        raise InvalidParam(f"shape mismatch: (H={p.horizon}, d={p.d}) vs (H={q.horizon}, d={q.d})")


# ---------------------------------------------------------------------------
# row-level helpers


def kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise ``sum_x p log(p/q)`` for matching ``(..., d)`` arrays."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    live = p > 0
    if np.any(live & (q <= 0)):
        raise SupportViolation("p has mass where q has none")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(live, p * (np.log(np.where(live, p, 1.0)) - np.log(np.where(live, q, 1.0))), 0.0)
    return terms.sum(axis=-1)


def hellinger_sq_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise ``sum_x (sqrt p - sqrt q)^2``, range ``[0, 2]``."""
    return ((np.sqrt(p) - np.sqrt(q)) ** 2).sum(axis=-1)


def conditional_kl(p_h: StepPolicy, q_h: StepPolicy, prefix: Sequence[int] = ()) -> float:
    return max(float(kl_rows(p_h.row(prefix), q_h.row(prefix))), 0.0)


# ---------------------------------------------------------------------------
# exact enumeration


def _joint_laws(p: SeqPolicy, q: SeqPolicy, cap):
    _check_shapes(p, q)
    check_cap(p.d**p.horizon, cap, "trajectories")
    return joint_log_law(p, cap), joint_log_law(q, cap)


def joint_kl_exact(p: SeqPolicy, q: SeqPolicy, cap: int | None = None) -> DivergenceReport:
    """``KL(P^p || P^q)`` summed over every trajectory."""
    lp, lq = _joint_laws(p, q, cap)
    live = np.isfinite(lp)
    if np.any(live & ~np.isfinite(lq)):
        raise SupportViolation("P^p charges a trajectory that P^q excludes")
    value = float(np.sum(np.exp(lp[live]) * (lp[live] - lq[live])))
    return DivergenceReport(max(value, 0.0), Method.EXACT_ENUMERATION)


def joint_kl_chain(p: SeqPolicy, q: SeqPolicy, cap: int | None = None) -> DivergenceReport:
    """``sum_h E_{s_h ~ P^p} KL(p_h(.|s_h) || q_h(.|s_h))`` by prefix enumeration.

    Unreachable prefixes contribute nothing, even if the rows there disagree in support.
    """
    _check_shapes(p, q)
    laws = prefix_log_laws(p, cap)
    total = 0.0
    for h in range(p.horizon):
        w = np.exp(laws[h])
        reach = w > 0
        rp = p.steps[h].rows_for_length(h)[reach]
        rq = q.steps[h].rows_for_length(h)[reach]
        total += float(np.dot(w[reach], kl_rows(rp, rq)))
    return DivergenceReport(max(total, 0.0), Method.CHAIN_RULE)


def squared_hellinger_exact(p: SeqPolicy, q: SeqPolicy, cap: int | None = None) -> DivergenceReport:
    lp, lq = _joint_laws(p, q, cap)
    value = float(np.sum((np.exp(0.5 * lp) - np.exp(0.5 * lq)) ** 2))
    return DivergenceReport(min(max(value, 0.0), 2.0), Method.EXACT_ENUMERATION)


def total_variation_exact(p: SeqPolicy, q: SeqPolicy, cap: int | None = None) -> DivergenceReport:
    lp, lq = _joint_laws(p, q, cap)
    value = 0.5 * float(np.sum(np.abs(np.exp(lp) - np.exp(lq))))
    return DivergenceReport(min(max(value, 0.0), 1.0), Method.EXACT_ENUMERATION)


def stepwise_squared_hellinger(p: SeqPolicy, q: SeqPolicy, cap: int | None = None) -> float:
    """``sum_h E_{s_h ~ P^p} D_H^2(p_h(.|s_h), q_h(.|s_h))``, the left side of the pseudo chain rule."""
    _check_shapes(p, q)
    laws = prefix_log_laws(p, cap)
    total = 0.0
    for h in range(p.horizon):
        w = np.exp(laws[h])
        total += float(np.dot(w, hellinger_sq_rows(p.steps[h].rows_for_length(h), q.steps[h].rows_for_length(h))))
    return total


# ---------------------------------------------------------------------------
# product-form shortcuts (context-free steps only)


def _cf_rows(p: SeqPolicy, q: SeqPolicy):
    _check_shapes(p, q)
    if not (p.is_context_free and q.is_context_free):
        raise InvalidParam("product-form divergences need context-free steps")
    P = np.stack([s.context_free_row for s in p.steps])
    Q = np.stack([s.context_free_row for s in q.steps])
    return P, Q


def product_kl(p: SeqPolicy, q: SeqPolicy) -> DivergenceReport:
    """Sum of per-step KLs; exact for independent steps by the chain rule."""
    P, Q = _cf_rows(p, q)
    return DivergenceReport(max(float(kl_rows(P, Q).sum()), 0.0), Method.PRODUCT_FORM)


def product_squared_hellinger(p: SeqPolicy, q: SeqPolicy) -> DivergenceReport:
    """``2 - 2 prod_h BC_h`` with per-step Bhattacharyya coefficients."""
    P, Q = _cf_rows(p, q)
    bc = np.sum(np.sqrt(P * Q), axis=1)
    if np.any(bc <= 0):
        return DivergenceReport(2.0, Method.PRODUCT_FORM)
    value = -2.0 * math.expm1(float(np.log(bc).sum()))
    return DivergenceReport(min(max(value, 0.0), 2.0), Method.PRODUCT_FORM)


# ---------------------------------------------------------------------------
# dispatching front doors


def joint_kl(p: SeqPolicy, q: SeqPolicy, cap: int | None = None) -> DivergenceReport:
    """Exact joint KL, via the product form when both policies are context-free."""
    if p.is_context_free and q.is_context_free:
        return product_kl(p, q)
    return joint_kl_exact(p, q, cap)


def squared_hellinger(p: SeqPolicy, q: SeqPolicy, cap: int | None = None) -> DivergenceReport:
    """``sum_S (sqrt P^p(S) - sqrt P^q(S))^2``."""
    if p.is_context_free and q.is_context_free:
        return product_squared_hellinger(p, q)
    return squared_hellinger_exact(p, q, cap)


def total_variation(p: SeqPolicy, q: SeqPolicy, cap: int | None = None) -> DivergenceReport:
    """``(1/2) sum_S |P^p(S) - P^q(S)|`` by enumeration."""
    return total_variation_exact(p, q, cap)


# ---------------------------------------------------------------------------
# Monte Carlo


def joint_kl_monte_carlo(
    p: SeqPolicy, q: SeqPolicy, samples: int, rng: np.random.Generator, batch: int = 100_000
) -> DivergenceReport:
    """Mean of ``log P^p(S) - log P^q(S)`` over ``S ~ P^p``; stderr is sd / sqrt(samples)."""
    _check_shapes(p, q)
    if samples < 2:
        raise InvalidParam("Monte Carlo needs at least 2 samples")
    s1 = 0.0
    s2 = 0.0
    shift = None
    done = 0
    while done < samples:
        k = min(batch, samples - done)
        toks = sample_dataset(p, k, rng)
        lp = log_joint_probs_batch(p, toks)
        try:
            lq = log_joint_probs_batch(q, toks)
        except ZeroProbability as exc:
            raise ZeroProbability("sampled trajectory has zero probability under q") from exc
        x = lp - lq
        if shift is None:
            shift = float(x.mean())
        x = x - shift
        s1 += float(x.sum())
        s2 += float(np.dot(x, x))
        done += k
    mean_c = s1 / samples
    var = max((s2 - samples * mean_c**2) / (samples - 1), 0.0)
    return DivergenceReport(
        value=mean_c + shift,
        method=Method.MONTE_CARLO,
        mc_samples=samples,
        mc_stderr=math.sqrt(var / samples),
    )
