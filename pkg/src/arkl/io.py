"""JSON text format for policies and policy classes.

Probabilities are written as decimal strings with 17 significant digits, which
round-trips every float64 exactly; ``dumps(loads(text)) == text`` for any text
produced here.

Policy::

    {"format": "arkl-policy", "horizon": H, "alphabet_size": d,
     "regime": "shared" | "per_step",
     "steps": [{"kind": "context_free", "row": ["0.25", ...]}
               | {"kind": "tabular", "tables": [[[...]], ...]}, ...]}

A shared policy stores its single step once. Classes use
``"format": "arkl-class"`` with ``"regime"`` one of ``decomposable``,
``fully_shared`` (both carrying ``"base"``: a list of steps) or ``dependent``
(carrying ``"members"``: a list of policies).
"""

from __future__ import annotations

import json

import numpy as np

from .ar_core import PolicyClass, Regime, SeqPolicy, StepKind, StepPolicy
from .errors import InvalidParam


def _num(x: float) -> str:
    return format(float(x), ".17g")


def _step_to_obj(step: StepPolicy) -> dict:
    if step.kind is StepKind.CONTEXT_FREE:
        return {"kind": "context_free", "row": [_num(x) for x in step.context_free_row]}
    return {"kind": "tabular", "tables": [[[_num(x) for x in row] for row in t] for t in step.tables]}


def _step_from_obj(obj: dict) -> StepPolicy:
    try:
        kind = obj["kind"]
        if kind == "context_free":
            return StepPolicy.context_free([float(x) for x in obj["row"]])
        if kind == "tabular":
            return StepPolicy.tabular([np.array([[float(x) for x in row] for row in t]) for t in obj["tables"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidParam(f"malformed step policy: {exc}") from exc
    raise InvalidParam(f"unknown step kind {obj.get('kind')!r}")


def policy_to_obj(policy: SeqPolicy) -> dict:
    shared = policy.is_shared and policy.horizon > 1
    steps = [policy.steps[0]] if shared else list(policy.steps)
    return {
        "format": "arkl-policy",
        "horizon": policy.horizon,
        "alphabet_size": policy.d,
        "regime": "shared" if shared else "per_step",
        "steps": [_step_to_obj(s) for s in steps],
    }


def policy_from_obj(obj: dict) -> SeqPolicy:
    if obj.get("format") != "arkl-policy":
        raise InvalidParam("not an arkl-policy document")
    try:
        H = int(obj["horizon"])
        d = int(obj["alphabet_size"])
        steps = [_step_from_obj(s) for s in obj["steps"]]
        regime = obj["regime"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidParam(f"malformed policy: {exc}") from exc
    if regime == "shared":
        if len(steps) != 1:
            raise InvalidParam("a shared policy stores exactly one step")
        pol = SeqPolicy.shared(steps[0], H)
    elif regime == "per_step":
        pol = SeqPolicy(tuple(steps))
    else:
        raise InvalidParam(f"unknown policy regime {regime!r}")
    if pol.horizon != H or pol.d != d:
        raise InvalidParam("declared horizon/alphabet_size disagree with the steps")
    return pol


def class_to_obj(cls: PolicyClass) -> dict:
    obj = {"format": "arkl-class", "horizon": cls.horizon, "alphabet_size": cls.d, "regime": cls.regime.value}
    if cls.regime is Regime.DEPENDENT:
        obj["members"] = [policy_to_obj(m) for m in cls.members]
    else:
        obj["base"] = [_step_to_obj(s) for s in cls.base]
    return obj


def class_from_obj(obj: dict) -> PolicyClass:
    if obj.get("format") != "arkl-class":
        raise InvalidParam("not an arkl-class document")
    try:
        regime = Regime(obj["regime"])
        H = int(obj["horizon"])
        if regime is Regime.DEPENDENT:
            return PolicyClass.dependent([policy_from_obj(m) for m in obj["members"]])
        return PolicyClass(regime, H, base=tuple(_step_from_obj(s) for s in obj["base"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidParam(f"malformed class: {exc}") from exc


def dumps(thing) -> str:
    if isinstance(thing, SeqPolicy):
        obj = policy_to_obj(thing)
    elif isinstance(thing, PolicyClass):
        obj = class_to_obj(thing)
    else:
        raise TypeError(f"cannot serialize {type(thing).__name__}")
    return json.dumps(obj, indent=1) + "\n"


def loads(text: str):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidParam(f"invalid JSON: {exc}") from exc
    return from_obj(obj)


def from_obj(obj: dict):
    fmt = obj.get("format") if isinstance(obj, dict) else None
    if fmt == "arkl-policy":
        return policy_from_obj(obj)
    if fmt == "arkl-class":
        return class_from_obj(obj)
    raise InvalidParam(f"unknown document format {fmt!r}")
