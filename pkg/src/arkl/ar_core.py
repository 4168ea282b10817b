"""Tabular autoregressive policies, policy classes, sampling and exact likelihoods.

Tokens are integers ``0 .. d-1``. A prefix of length ``L`` is identified with
its lexicographic index ``sum_i u_i * d**(L-1-i)``, so a tabular step policy is
a list of dense ``(d**L, d)`` row matrices, one per prefix length. This keeps
prefix lookup exact (no hashing) and lets every enumeration routine work on
whole row blocks at once.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

from .errors import CapExceeded, InvalidParam, Unbounded, ZeroProbability

DEFAULT_CAP = 10**7
ROW_ATOL = 1e-12

Trajectory = tuple[int, ...]


def enumeration_cap(cap: int | None = None) -> int:
    """Resolve the enumeration cap: explicit argument, then ``ARKL_CAP``, then default."""
    if cap is not None:
        return int(cap)
    env = os.environ.get("ARKL_CAP")
    if env:
        try:
            return int(float(env))
        except ValueError as exc:
            raise InvalidParam(f"ARKL_CAP must be an integer, got {env!r}") from exc
    return DEFAULT_CAP


def check_cap(count: int, cap: int | None = None, what: str = "states") -> None:
    limit = enumeration_cap(cap)
    if count > limit:
        raise CapExceeded(f"{count} {what} exceeds enumeration cap {limit}")


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 2:
            raise InvalidParam(f"alphabet size must be an integer >= 2, got {self.size}")


class StepKind(str, Enum):
    CONTEXT_FREE = "context_free"
    TABULAR = "tabular"


class Regime(str, Enum):
    DECOMPOSABLE = "decomposable"
    FULLY_SHARED = "fully_shared"
    DEPENDENT = "dependent"


def _as_rows(rows, d: int | None = None) -> np.ndarray:
    arr = np.array(rows, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise InvalidParam("probability rows must be a vector or a matrix")
    if d is not None and arr.shape[1] != d:
        raise InvalidParam(f"rows have width {arr.shape[1]}, expected {d}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidParam("probability rows must be finite and nonnegative")
    sums = arr.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > ROW_ATOL):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise InvalidParam(f"probability rows must sum to 1 (off by {worst:.3g})")
    arr.setflags(write=False)
    return arr


def prefix_index(prefixes: np.ndarray, d: int) -> np.ndarray:
    """Lexicographic index of each row of an ``(n, L)`` token array."""
    prefixes = np.asarray(prefixes, dtype=np.int64)
    idx = np.zeros(prefixes.shape[0], dtype=np.int64)
    for col in range(prefixes.shape[1]):
        idx = idx * d + prefixes[:, col]
    return idx


@dataclass(frozen=True, eq=False)
class StepPolicy:
    """A conditional next-token distribution ``pi_h(. | prefix)``.

    Build instances with :meth:`context_free` or :meth:`tabular`; the raw
    constructor does not validate.
    """

    kind: StepKind
    d: int
    context_free_row: np.ndarray | None = None
    tables: tuple[np.ndarray, ...] | None = None
    _fingerprint: bytes = field(default=b"", repr=False)

    @classmethod
    def context_free(cls, row: Sequence[float]) -> "StepPolicy":
        arr = _as_rows(row)
        if arr.shape[0] != 1:
            raise InvalidParam("a context-free policy takes a single row")
        d = arr.shape[1]
        Alphabet(d)
        row1 = arr[0]
        fp = b"cf" + row1.tobytes()
        return cls(StepKind.CONTEXT_FREE, d, context_free_row=row1, _fingerprint=fp)

    @classmethod
    def tabular(cls, tables: Sequence) -> "StepPolicy":
        """``tables[L]`` holds the ``(d**L, d)`` rows for prefixes of length ``L``."""
        if len(tables) == 0:
            raise InvalidParam("a tabular policy needs at least the empty-prefix row")
        first = _as_rows(tables[0])
        d = first.shape[1]
        Alphabet(d)
        out = [first]
        for L in range(1, len(tables)):
            arr = _as_rows(tables[L], d)
            if arr.shape[0] != d**L:
                raise InvalidParam(f"table for prefix length {L} needs {d**L} rows, got {arr.shape[0]}")
            out.append(arr)
        if out[0].shape[0] != 1:
            raise InvalidParam("table for prefix length 0 needs exactly one row")
        fp = b"tab" + b"".join(t.tobytes() for t in out)
        return cls(StepKind.TABULAR, d, tables=tuple(out), _fingerprint=fp)

    @classmethod
    def from_mapping(cls, mapping: dict, d: int, max_len: int) -> "StepPolicy":
        """Tabular policy from an explicit ``{prefix tuple: row}`` mapping covering every prefix."""
        tables = []
        for L in range(max_len + 1):
            block = np.empty((d**L, d))
            for i, prefix in enumerate(itertools.product(range(d), repeat=L)):
                if prefix not in mapping:
                    raise InvalidParam(f"mapping is missing prefix {prefix}")
                block[i] = mapping[prefix]
            tables.append(block)
        return cls.tabular(tables)

    @property
    def fingerprint(self) -> bytes:
        return self._fingerprint

    @property
    def max_prefix_len(self) -> int | None:
        """Longest prefix covered, or ``None`` when any prefix is accepted."""
        if self.kind is StepKind.CONTEXT_FREE:
            return None
        return len(self.tables) - 1

    def covers(self, length: int) -> bool:
        return self.max_prefix_len is None or length <= self.max_prefix_len

    def row(self, prefix: Sequence[int] = ()) -> np.ndarray:
        if self.kind is StepKind.CONTEXT_FREE:
            return self.context_free_row
        L = len(prefix)
        if not self.covers(L):
            raise InvalidParam(f"prefix of length {L} is beyond this table (max {self.max_prefix_len})")
        idx = 0
        for u in prefix:
            if not 0 <= u < self.d:
                raise InvalidParam(f"token {u} outside alphabet of size {self.d}")
            idx = idx * self.d + int(u)
        return self.tables[L][idx]

    def rows_for_length(self, length: int) -> np.ndarray:
        """All ``d**length`` rows in lexicographic prefix order (a broadcast view when context-free)."""
        if self.kind is StepKind.CONTEXT_FREE:
            return np.broadcast_to(self.context_free_row, (self.d**length, self.d))
        if not self.covers(length):
            raise InvalidParam(f"prefix length {length} is beyond this table (max {self.max_prefix_len})")
        return self.tables[length]

    def rows_at(self, prefixes: np.ndarray) -> np.ndarray:
        """Rows for each prefix in an ``(n, L)`` token array."""
        n, L = prefixes.shape
        if self.kind is StepKind.CONTEXT_FREE:
            return np.broadcast_to(self.context_free_row, (n, self.d))
        return self.rows_for_length(L)[prefix_index(prefixes, self.d)]

    def min_prob(self) -> float:
        if self.kind is StepKind.CONTEXT_FREE:
            return float(self.context_free_row.min())
        return float(min(t.min() for t in self.tables))

    def __repr__(self):
        if self.kind is StepKind.CONTEXT_FREE:
            return f"StepPolicy.context_free({np.array2string(self.context_free_row, precision=4)})"
        return f"StepPolicy.tabular(d={self.d}, max_prefix_len={self.max_prefix_len})"


@dataclass(frozen=True, eq=False)
class SeqPolicy:
    """An H-tuple of step policies; step ``h`` (0-based) reads prefixes of length ``h``."""

    steps: tuple[StepPolicy, ...]

    def __post_init__(self):
        steps = tuple(self.steps)
        object.__setattr__(self, "steps", steps)
        if not steps:
            raise InvalidParam("a sequence policy needs at least one step")
        d = steps[0].d
        for h, step in enumerate(steps):
            if step.d != d:
                raise InvalidParam("all steps must share one alphabet")
            if not step.covers(h):
                raise InvalidParam(f"step {h} table does not cover prefixes of length {h}")

    @classmethod
    def shared(cls, step: StepPolicy, horizon: int) -> "SeqPolicy":
        if horizon < 1:
            raise InvalidParam("horizon must be >= 1")
        return cls((step,) * horizon)

    @property
    def horizon(self) -> int:
        return len(self.steps)

    @property
    def d(self) -> int:
        return self.steps[0].d

    @property
    def is_context_free(self) -> bool:
        return all(s.kind is StepKind.CONTEXT_FREE for s in self.steps)

    @property
    def is_shared(self) -> bool:
        return all(s is self.steps[0] for s in self.steps)

    def __len__(self):
        return self.horizon

    def __repr__(self):
        return f"SeqPolicy(H={self.horizon}, d={self.d}, steps={list(self.steps)!r})"


@dataclass(frozen=True, eq=False)
class PolicyClass:
    """A finite policy class in one of three regimes.

    Decomposable and fully-shared classes keep only the base list; members are
    materialized on demand by :func:`class_members`.
    """

    regime: Regime
    horizon: int
    base: tuple[StepPolicy, ...] | None = None
    members: tuple[SeqPolicy, ...] | None = None

    def __post_init__(self):
        regime = Regime(self.regime)
        object.__setattr__(self, "regime", regime)
        if self.horizon < 1:
            raise InvalidParam("horizon must be >= 1")
        if regime is Regime.DEPENDENT:
            members = tuple(self.members or ())
            object.__setattr__(self, "members", members)
            if not members:
                raise InvalidParam("a dependent class needs at least one member")
            for m in members:
                if m.horizon != self.horizon or m.d != members[0].d:
                    raise InvalidParam("dependent members must share horizon and alphabet")
            keys = {tuple(s.fingerprint for s in m.steps) for m in members}
            if len(keys) != len(members):
                raise InvalidParam("dependent members must be distinct policies")
            n0, n, H = cardinality_sandwich(self)
            if not (n0 <= H * n and n <= n0**H):
                raise AssertionError("cardinality sandwich violated; marginal extraction is broken")
        else:
            base = tuple(self.base or ())
            object.__setattr__(self, "base", base)
            if not base:
                raise InvalidParam("the base class must be nonempty")
            for b in base:
                if b.d != base[0].d or not b.covers(self.horizon - 1):
                    raise InvalidParam("base policies must share the alphabet and cover the horizon")

    @classmethod
    def decomposable(cls, base: Sequence[StepPolicy], horizon: int) -> "PolicyClass":
        return cls(Regime.DECOMPOSABLE, horizon, base=tuple(base))

    @classmethod
    def fully_shared(cls, base: Sequence[StepPolicy], horizon: int) -> "PolicyClass":
        return cls(Regime.FULLY_SHARED, horizon, base=tuple(base))

    @classmethod
    def dependent(cls, members: Sequence[SeqPolicy]) -> "PolicyClass":
        members = tuple(members)
        if not members:
            raise InvalidParam("a dependent class needs at least one member")
        return cls(Regime.DEPENDENT, members[0].horizon, members=members)

    @property
    def d(self) -> int:
        return self.members[0].d if self.regime is Regime.DEPENDENT else self.base[0].d

    @property
    def size(self) -> int:
        """Exact member count ``|Pi|`` as a Python integer."""
        if self.regime is Regime.DECOMPOSABLE:
            return len(self.base) ** self.horizon
        if self.regime is Regime.FULLY_SHARED:
            return len(self.base)
        return len(self.members)

    def step_candidates(self, h: int) -> list[StepPolicy]:
        """Distinct step-``h`` conditionals realized by some member."""
        if self.regime is not Regime.DEPENDENT:
            return list(self.base)
        return _dedupe(m.steps[h] for m in self.members)

    def marginal_union(self) -> list[StepPolicy]:
        """The lifted base class: union over ``h`` of the step marginals."""
        if self.regime is not Regime.DEPENDENT:
            return list(self.base)
        return _dedupe(m.steps[h] for h in range(self.horizon) for m in self.members)


def _dedupe(steps) -> list[StepPolicy]:
    seen: dict[bytes, StepPolicy] = {}
    for s in steps:
        seen.setdefault(s.fingerprint, s)
    return list(seen.values())


def cardinality_sandwich(cls: PolicyClass) -> tuple[int, int, int]:
    """Return ``(|Pi_0|, |Pi|, H)``; callers check ``|Pi_0| <= H|Pi|`` and ``|Pi| <= |Pi_0|**H``."""
    return len(cls.marginal_union()), cls.size, cls.horizon


def class_members(cls: PolicyClass, cap: int | None = None) -> Iterator[SeqPolicy]:
    """Yield every member exactly once, in base-index (lexicographic) order."""
    if cls.regime is Regime.DEPENDENT:
        yield from cls.members
    elif cls.regime is Regime.FULLY_SHARED:
        for b in cls.base:
            yield SeqPolicy.shared(b, cls.horizon)
    else:
        check_cap(cls.size, cap, "class members")
        for combo in itertools.product(cls.base, repeat=cls.horizon):
            yield SeqPolicy(combo)


# ---------------------------------------------------------------------------
# sampling and likelihoods


def sample_dataset(policy: SeqPolicy, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` i.i.d. trajectories as an ``(n, H)`` int array."""
    H, d = policy.horizon, policy.d
    out = np.empty((n, H), dtype=np.int64)
    for h, step in enumerate(policy.steps):
        u = rng.random(n)
        if step.kind is StepKind.CONTEXT_FREE:
            cdf = np.cumsum(step.context_free_row)
            tok = np.searchsorted(cdf, u, side="right")
        else:
            cdf = np.cumsum(step.rows_at(out[:, :h]), axis=1)
            tok = (u[:, None] >= cdf).sum(axis=1)
        out[:, h] = np.minimum(tok, d - 1)
    return out


def sample_trajectory(policy: SeqPolicy, rng: np.random.Generator) -> Trajectory:
    return tuple(int(t) for t in sample_dataset(policy, 1, rng)[0])


def step_log_probs(step: StepPolicy, tokens: np.ndarray, h: int) -> np.ndarray:
    """``log pi(u_h | u_<h)`` for every row of an ``(n, H)`` token array."""
    tokens = np.asarray(tokens)
    if step.kind is StepKind.CONTEXT_FREE:
        p = step.context_free_row[tokens[:, h]]
    else:
        p = step.rows_at(tokens[:, :h])[np.arange(tokens.shape[0]), tokens[:, h]]
    if np.any(p <= 0):
        raise ZeroProbability(f"zero conditional probability at step {h}")
    return np.log(p)


def log_joint_probs_batch(policy: SeqPolicy, tokens: np.ndarray) -> np.ndarray:
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 2 or tokens.shape[1] != policy.horizon:
        raise InvalidParam(f"expected an (n, {policy.horizon}) token array")
    if tokens.size and (tokens.min() < 0 or tokens.max() >= policy.d):
        raise InvalidParam("token outside the alphabet")
    total = np.zeros(tokens.shape[0])
    for h, step in enumerate(policy.steps):
        total += step_log_probs(step, tokens, h)
    return total


def log_joint_prob(policy: SeqPolicy, traj: Sequence[int]) -> float:
    """``sum_h log pi_h(u_h | u_<h)`` in nats; raises :class:`ZeroProbability` on a zero factor."""
    if len(traj) != policy.horizon:
        raise InvalidParam(f"trajectory length {len(traj)} != horizon {policy.horizon}")
    if any(not 0 <= int(u) < policy.d for u in traj):
        raise InvalidParam(f"trajectory {tuple(traj)} has tokens outside 0..{policy.d - 1}")
    total = 0.0
    for h, step in enumerate(policy.steps):
        p = step.row(traj[:h])[traj[h]]
        if p <= 0:
            raise ZeroProbability(f"zero conditional probability at step {h} of {tuple(traj)}")
        total += math.log(p)
    return total


def enumerate_trajectories(H: int, d: int, cap: int | None = None) -> np.ndarray:
    """All ``d**H`` trajectories as rows, in lexicographic order."""
    if H < 1 or d < 1:
        raise InvalidParam("H and d must be positive")
    check_cap(d**H, cap, "trajectories")
    return np.indices((d,) * H).reshape(H, -1).T.copy()


def prefix_log_laws(policy: SeqPolicy, cap: int | None = None) -> list[np.ndarray]:
    """``out[h]`` is the log-law of length-``h`` prefixes, ``h = 0..H``, lexicographic order.

    ``out[H]`` is the full joint log-law over :func:`enumerate_trajectories`.
    Zero-probability entries come out as ``-inf``.
    """
    check_cap(policy.d**policy.horizon, cap, "trajectories")
    laws = [np.zeros(1)]
    with np.errstate(divide="ignore"):
        for h, step in enumerate(policy.steps):
            rows = step.rows_for_length(h)
            laws.append((laws[-1][:, None] + np.log(rows)).reshape(-1))
    return laws


def joint_log_law(policy: SeqPolicy, cap: int | None = None) -> np.ndarray:
    return prefix_log_laws(policy, cap)[-1]


def entropy(policy: SeqPolicy, cap: int | None = None) -> float:
    logp = joint_log_law(policy, cap)
    p = np.exp(logp)
    mask = p > 0
    return float(-np.sum(p[mask] * logp[mask]))


# ---------------------------------------------------------------------------
# Assumption-1 style log-ratio bounds


def _max_log_ratio(num: StepPolicy, den: StepPolicy, length: int) -> float:
    if num.kind is StepKind.CONTEXT_FREE and den.kind is StepKind.CONTEXT_FREE:
        a, b = num.context_free_row, den.context_free_row
    else:
        a, b = num.rows_for_length(length), den.rows_for_length(length)
    live = a > 0
    if np.any(live & (b <= 0)):
        raise Unbounded("numerator has mass where the denominator has none")
    return float(np.max(np.log(a[live]) - np.log(b[live])))


def log_ratio_bound(pi_star: SeqPolicy, cls: PolicyClass, cap: int | None = None) -> float:
    """``G = sup_{pi, h, s, x} log(pi*_h(x|s) / pi_h(x|s))`` over the class, computed exactly."""
    if pi_star.horizon != cls.horizon or pi_star.d != cls.d:
        raise InvalidParam("pi_star and the class must share horizon and alphabet")
    worst = -math.inf
    for h in range(cls.horizon):
        check_cap(cls.d**h, cap, "prefixes")
        for cand in cls.step_candidates(h):
            worst = max(worst, _max_log_ratio(pi_star.steps[h], cand, h))
    return worst


def log_ratio_spread(cls: PolicyClass, cap: int | None = None) -> float:
    """Same supremum but between pairs of class members (the symmetric variant)."""
    worst = 0.0
    for h in range(cls.horizon):
        check_cap(cls.d**h, cap, "prefixes")
        cands = cls.step_candidates(h)
        for a in cands:
            for b in cands:
                if a is not b:
                    worst = max(worst, _max_log_ratio(a, b, h))
    return worst


# ---------------------------------------------------------------------------
# random instances


def random_row(d: int, rng: np.random.Generator, concentration: float = 1.0, size=None) -> np.ndarray:
    """Dirichlet rows, renormalized so each sums to one to machine precision."""
    shape = (d,) if size is None else (*np.atleast_1d(size), d)
    g = rng.gamma(concentration, size=shape)
    g = np.maximum(g, 1e-300)
    return g / g.sum(axis=-1, keepdims=True)


def random_step_policy(
    d: int,
    rng: np.random.Generator,
    max_prefix_len: int = 0,
    context_free: bool = False,
    concentration: float = 1.0,
    floor: float = 0.0,
) -> StepPolicy:
    """A random step policy; ``floor`` mixes in the uniform row to keep entries away from zero."""

    def draw(size=None):
        r = random_row(d, rng, concentration, size)
        return (1 - floor) * r + floor / d if floor else r

    if context_free:
        return StepPolicy.context_free(draw())
    return StepPolicy.tabular([draw(d**L) for L in range(max_prefix_len + 1)])


def random_seq_policy(
    d: int,
    H: int,
    rng: np.random.Generator,
    shared: bool = False,
    context_free: bool = False,
    concentration: float = 1.0,
    floor: float = 0.0,
) -> SeqPolicy:
    if shared:
        step = random_step_policy(d, rng, H - 1, context_free, concentration, floor)
        return SeqPolicy.shared(step, H)
    return SeqPolicy(
        tuple(random_step_policy(d, rng, h, context_free, concentration, floor) for h in range(H))
    )


def point_mass_policy(traj: Sequence[int], d: int) -> SeqPolicy:
    """A deterministic context-free policy that always emits ``traj``."""
    steps = []
    for u in traj:
        row = np.zeros(d)
        row[u] = 1.0
        steps.append(StepPolicy.context_free(row))
    return SeqPolicy(tuple(steps))


def uniform_policy(d: int, H: int) -> SeqPolicy:
    return SeqPolicy.shared(StepPolicy.context_free(np.full(d, 1.0 / d)), H)
