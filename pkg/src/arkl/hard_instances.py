"""Lower-bound constructions with their closed-form oracle values.

* Hadamard families: context-free rows ``exp(eps * v_s) / (d cosh eps)`` built
  from balanced, pairwise orthogonal Sylvester columns.
* Fano product instances: an H-step decomposable class over a Hadamard family.
* Bernoulli misspecification instances used for the no-sharp-oracle event.
* Dependent instances: one Hadamard step over a super-alphabet that stands
  for whole trajectories, with the ratio budget scaled by the horizon.
* Generic random misspecified instances (not from the lower-bound proofs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ar_core import (
    PolicyClass,
    Regime,
    SeqPolicy,
    StepPolicy,
    class_members,
    prefix_log_laws,
    random_step_policy,
)
from .divergences import joint_kl, kl_rows
from .errors import InvalidParam


def sylvester(order: int) -> np.ndarray:
    """Sylvester Hadamard matrix of a power-of-two order."""
    if order < 1 or order & (order - 1):
        raise InvalidParam(f"Sylvester order must be a power of two, got {order}")
    H = np.ones((1, 1), dtype=np.int64)
    while H.shape[0] < order:
        H = np.block([[H, H], [H, -H]])
    return H


def hadamard_columns(m: int) -> np.ndarray:
    """``(d, m)`` array of balanced, pairwise orthogonal sign columns.

    The all-ones column is skipped, so the order is the smallest power of two
    strictly greater than ``m``.
    """
    if m < 1:
        raise InvalidParam("need at least one column")
    d = 2
    while d - 1 < m:
        d *= 2
    return sylvester(d)[:, 1 : m + 1].copy()


def pairwise_kl_closed_form(eps: float) -> float:
    return eps * math.tanh(eps)


def kl_to_uniform_closed_form(eps: float) -> float:
    return eps * math.tanh(eps) - math.log(math.cosh(eps))


@dataclass(frozen=True, eq=False)
class HadamardFamily:
    m: int
    d: int
    eps: float
    columns: np.ndarray
    members: tuple[StepPolicy, ...]

    @property
    def pairwise_kl(self) -> float:
        return pairwise_kl_closed_form(self.eps)

    @property
    def kl_to_uniform(self) -> float:
        """KL from any member to the uniform law ``1/d`` on the sample space."""
        return kl_to_uniform_closed_form(self.eps)

    @property
    def uniform(self) -> StepPolicy:
        return StepPolicy.context_free(np.full(self.d, 1.0 / self.d))

    def manifest(self) -> dict:
        return {
            "construction": "hadamard_family",
            "params": {"m": self.m, "eps": self.eps},
            "d": self.d,
            "oracle": {
                "pairwise_kl": self.pairwise_kl,
                "kl_to_uniform": self.kl_to_uniform,
                "max_log_ratio": 2 * self.eps,
            },
        }


def make_hadamard_family(m: int, eps: float) -> HadamardFamily:
    if m < 2:
        raise InvalidParam("a Hadamard family needs m >= 2")
    if not 0.0 <= eps <= 1.0:
        raise InvalidParam(f"eps must lie in [0, 1], got {eps}")
    cols = hadamard_columns(m)
    d = cols.shape[0]
    members = []
    for j in range(m):
        logits = eps * cols[:, j]
        row = np.exp(logits) / (d * math.cosh(eps))
        members.append(StepPolicy.context_free(row / row.sum()))
    cols.setflags(write=False)
    return HadamardFamily(m, d, float(eps), cols, tuple(members))


def fano_eps(G: float, m: int, n: int) -> float:
    """``(G/4) sqrt(log m / n)``, clipped to ``min(G/2, 1)``."""
    if G <= 0 or n < 1 or m < 2:
        raise InvalidParam("need G > 0, n >= 1, m >= 2")
    return min(G / 4 * math.sqrt(math.log(m) / n), G / 2, 1.0)


@dataclass(frozen=True, eq=False)
class FanoProductInstance:
    family: HadamardFamily
    H: int
    policy_class: PolicyClass
    truth_index: tuple[int, ...]
    seed: int | None = None

    @property
    def truth(self) -> SeqPolicy:
        return self.policy_at(self.truth_index)

    def policy_at(self, theta: Sequence[int]) -> SeqPolicy:
        return SeqPolicy(tuple(self.family.members[t] for t in theta))

    def kl_closed_form(self, theta: Sequence[int], theta_prime: Sequence[int]) -> float:
        ham = sum(a != b for a, b in zip(theta, theta_prime))
        return ham * self.family.pairwise_kl

    def manifest(self) -> dict:
        return {
            "construction": "fano_product",
            "params": {"H": self.H, "m": self.family.m, "eps": self.family.eps},
            "d": self.family.d,
            "truth_index": list(self.truth_index),
            "seed": self.seed,
            "oracle": {
                "per_step_kl": self.family.pairwise_kl,
                "kl_to_uniform": self.family.kl_to_uniform,
                "risk_lower_bound_constant": 1 / 64,
            },
        }


def make_fano_instance(
    H: int,
    m: int,
    eps: float | None = None,
    truth_index: Sequence[int] | None = None,
    rng: np.random.Generator | None = None,
    *,
    G: float | None = None,
    n: int | None = None,
    seed: int | None = None,
) -> FanoProductInstance:
    """Decomposable class ``family**H`` with truth ``pi^theta``.

    ``eps`` may be omitted when ``G`` and ``n`` are given (see :func:`fano_eps`).
    ``truth_index`` is drawn uniformly from ``rng`` when omitted.
    """
    if H < 1:
        raise InvalidParam("H must be >= 1")
    if eps is None:
        if G is None or n is None:
            raise InvalidParam("give eps, or both G and n")
        eps = fano_eps(G, m, n)
    family = make_hadamard_family(m, eps)
    if truth_index is None:
        if rng is None:
            raise InvalidParam("give truth_index or an rng to draw it")
        truth_index = tuple(int(t) for t in rng.integers(0, m, size=H))
    truth_index = tuple(int(t) for t in truth_index)
    if len(truth_index) != H or any(not 0 <= t < m for t in truth_index):
        raise InvalidParam("truth_index must be a length-H vector over range(m)")
    cls = PolicyClass.decomposable(family.members, H)
    return FanoProductInstance(family, H, cls, truth_index, seed)


BERNOULLI_A = 0.25


def _bern(p1: float) -> StepPolicy:
    return StepPolicy.context_free([1.0 - p1, p1])


@dataclass(frozen=True, eq=False)
class BernoulliMisspecInstance:
    n: int
    H: int
    sign: int
    a: float
    b: float
    base: tuple[StepPolicy, StepPolicy]
    truth: SeqPolicy
    policy_class: PolicyClass

    @property
    def gap_per_step(self) -> float:
        """Excess KL of the wrong base member: ``2b log((1/2+a)/(1/2-a))``."""
        return 2 * self.b * math.log((0.5 + self.a) / (0.5 - self.a))

    @property
    def best_index(self) -> int:
        """Index of the KL-closest base member (0 is ``1/2+a``)."""
        return 0 if self.sign > 0 else 1

    def min_class_kl(self) -> float:
        """Per-step optimum times ``H`` (truth and base are context-free)."""
        best = self.base[self.best_index]
        return self.H * float(kl_rows(self.truth.steps[0].context_free_row, best.context_free_row))

    def le_cam_tv_bound(self) -> float:
        """``sqrt(n/2 * 16 b^2)`` bound on TV between the two signed n-fold laws."""
        return math.sqrt(self.n / 2 * 16 * self.b**2)

    def manifest(self) -> dict:
        return {
            "construction": "bernoulli_misspec",
            "params": {"n": self.n, "H": self.H, "sign": self.sign, "regime": self.policy_class.regime.value},
            "oracle": {
                "a": self.a,
                "b": self.b,
                "gap_per_step": self.gap_per_step,
                "min_class_kl": self.min_class_kl(),
                "le_cam_tv_bound": self.le_cam_tv_bound(),
            },
        }


def make_bernoulli_instance(n: int, H: int = 1, sign: int | str = +1, regime: str = "decomposable") -> BernoulliMisspecInstance:
    """Base ``{Bern(1/2+a), Bern(1/2-a)}`` with ``a = 1/4``; truth ``Bern(1/2 + sign*b)``, ``b = 1/(10 sqrt n)``."""
    if n < 1 or H < 1:
        raise InvalidParam("need n >= 1 and H >= 1")
    if sign in ("+", "plus"):
        sign = 1
    elif sign in ("-", "minus"):
        sign = -1
    if sign not in (1, -1):
        raise InvalidParam("sign must be +1/-1 or '+'/'-'")
    a = BERNOULLI_A
    b = 1.0 / (10.0 * math.sqrt(n))
    base = (_bern(0.5 + a), _bern(0.5 - a))
    truth = SeqPolicy.shared(_bern(0.5 + sign * b), H)
    reg = Regime(regime)
    if reg is Regime.DEPENDENT:
        raise InvalidParam("Bernoulli instances use decomposable or fully_shared classes")
    cls = PolicyClass(reg, H, base=base)
    return BernoulliMisspecInstance(n, H, sign, a, b, base, truth, cls)


@dataclass(frozen=True, eq=False)
class DependentHardInstance:
    M: int
    H: int
    G: float
    n: int
    eps: float
    family: HadamardFamily
    policy_class: PolicyClass

    @property
    def d(self) -> int:
        return self.family.d

    @property
    def pairwise_kl(self) -> float:
        return self.family.pairwise_kl

    @property
    def kl_to_uniform(self) -> float:
        return self.family.kl_to_uniform

    def manifest(self) -> dict:
        return {
            "construction": "dependent_hard",
            "params": {"M": self.M, "H": self.H, "G": self.G, "n": self.n},
            "encoding": "one step over a super-alphabet; each outcome stands for a whole trajectory",
            "d": self.d,
            "eps": self.eps,
            "oracle": {
                "pairwise_kl": self.pairwise_kl,
                "kl_to_uniform": self.kl_to_uniform,
                "max_log_ratio": 2 * self.eps,
                "ratio_budget": self.H * self.G,
            },
        }


def dependent_eps(H: int, M: int, G: float, n: int) -> float:
    return min(H * G / 4 * math.sqrt(math.log(M) / n), H * G / 2, 1.0)


def make_dependent_instance(H: int, M: int, G: float, n: int, eps: float | None = None) -> DependentHardInstance:
    """Dependent class whose ``M`` members are Hadamard laws over a super-alphabet.

    Passing ``eps`` overrides the default ``min((HG/4) sqrt(log M / n), HG/2, 1)``.
    """
    if M < 4:
        raise InvalidParam("the dependent construction needs M >= 4")
    if H < 1 or n < 1 or G <= 0:
        raise InvalidParam("need H >= 1, n >= 1, G > 0")
    if eps is None:
        eps = dependent_eps(H, M, G, n)
    if eps <= 0:
        raise InvalidParam("eps must be positive: at eps = 0 all members coincide and the class has one element")
    family = make_hadamard_family(M, eps)
    cls = PolicyClass.dependent([SeqPolicy((s,)) for s in family.members])
    return DependentHardInstance(M, H, G, n, float(eps), family, cls)


@dataclass(frozen=True, eq=False)
class MisspecifiedInstance:
    truth: SeqPolicy
    policy_class: PolicyClass
    min_class_kl: float
    argmin: int | list[int]
    perturbation: float
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def manifest(self) -> dict:
        return {
            "construction": "random_misspecified",
            "params": {
                "H": self.policy_class.horizon,
                "d": self.policy_class.d,
                "class_size": len(self.policy_class.base),
                "perturbation": self.perturbation,
                "regime": self.policy_class.regime.value,
                **self.meta,
            },
            "seed": self.seed,
            "oracle": {"min_class_kl": self.min_class_kl, "argmin": self.argmin},
        }


def stepwise_expected_kls(truth: SeqPolicy, base: Sequence[StepPolicy], cap: int | None = None) -> np.ndarray:
    """``(H, |base|)`` array of ``E_{s_h ~ P^truth} KL(truth_h(.|s_h) || b(.|s_h))``."""
    H = truth.horizon
    out = np.empty((H, len(base)))
    if truth.is_context_free and all(b.context_free_row is not None for b in base):
        for h in range(H):
            for j, b in enumerate(base):
                out[h, j] = kl_rows(truth.steps[h].context_free_row, b.context_free_row)
        return out
    laws = prefix_log_laws(truth, cap)
    for h in range(H):
        w = np.exp(laws[h])
        rt = truth.steps[h].rows_for_length(h)
        for j, b in enumerate(base):
            out[h, j] = float(np.dot(w, kl_rows(rt, b.rows_for_length(h))))
    return out


def min_class_kl(truth: SeqPolicy, cls: PolicyClass, cap: int | None = None) -> tuple[float, int | list[int]]:
    """``min_{pi in class} KL(P^truth || P^pi)`` and its argmin (stepwise for decomposable classes)."""
    if cls.regime is Regime.DECOMPOSABLE:
        E = stepwise_expected_kls(truth, cls.base, cap)
        idx = [int(np.argmin(E[h])) for h in range(cls.horizon)]
        return float(sum(E[h, j] for h, j in enumerate(idx))), idx
    if cls.regime is Regime.FULLY_SHARED:
        E = stepwise_expected_kls(truth, cls.base, cap).sum(axis=0)
        j = int(np.argmin(E))
        return float(E[j]), j
    vals = [joint_kl(truth, m, cap).value for m in class_members(cls, cap)]
    j = int(np.argmin(vals))
    return float(vals[j]), j


def make_misspecified_instance(
    H: int,
    d: int,
    class_size: int,
    perturbation: float,
    rng: np.random.Generator,
    *,
    regime: str = "decomposable",
    context_free: bool = False,
    floor: float = 0.05,
    seed: int | None = None,
) -> MisspecifiedInstance:
    """Random base class plus a truth that mixes two members' rows.

    Each truth step is ``(1 - perturbation) * row_i + perturbation * row_j`` for
    two distinct random base members, shared across steps. ``perturbation = 0``
    gives a realizable instance. ``floor`` keeps every entry away from zero.
    """
    if class_size < 2:
        raise InvalidParam("class_size must be >= 2")
    if not 0.0 <= perturbation <= 1.0:
        raise InvalidParam("perturbation must lie in [0, 1]")
    if not 0.0 < floor <= 1.0:
        raise InvalidParam("floor must lie in (0, 1] so every row has full support")
    base = [random_step_policy(d, rng, H - 1, context_free, floor=floor) for _ in range(class_size)]
    i, j = (int(x) for x in rng.choice(class_size, size=2, replace=False))
    if context_free:
        row = (1 - perturbation) * base[i].context_free_row + perturbation * base[j].context_free_row
        step = StepPolicy.context_free(row / row.sum())
    else:
        tables = []
        for L in range(H):
            blk = (1 - perturbation) * base[i].rows_for_length(L) + perturbation * base[j].rows_for_length(L)
            tables.append(blk / blk.sum(axis=1, keepdims=True))
        step = StepPolicy.tabular(tables)
    truth = SeqPolicy.shared(step, H)
    cls = PolicyClass(Regime(regime), H, base=tuple(base))
    if cls.regime is Regime.DEPENDENT:
        raise InvalidParam("random misspecified instances use decomposable or fully_shared classes")
    mkl, arg = min_class_kl(truth, cls)
    if perturbation > 0 and mkl <= 1e-12:
        raise InvalidParam("perturbation too small: truth is numerically inside the class")
    return MisspecifiedInstance(truth, cls, mkl, arg, perturbation, seed, {"mixed_members": [i, j]})
