"""JSON problem files: complex numbers as {"re": .., "im": ..}, infinity as "inf"."""
from __future__ import annotations

import json
import math

from .linalg import BoundaryParam
from .model import (Constant, ExpDecay, Potential, Problem, Step, StepPolicy, Table,
                    Truncation, Zero)


class ConfigError(ValueError):
    pass


def _c(v) -> complex:
    if isinstance(v, dict):
        extra = set(v) - {"re", "im"}
        if extra:
            raise ConfigError(f"unexpected keys {sorted(extra)} in complex number")
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    raise ConfigError(f"expected a number or {{re, im}}, got {v!r}")


def _c_out(z) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _real_or_inf(v) -> float:
    if v == "inf":
        return math.inf
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise ConfigError(f"expected a real number or 'inf', got {v!r}")


def _real_out(x: float):
    return "inf" if math.isinf(x) else float(x)


def _param(v) -> BoundaryParam:
    if v == "inf":
        return BoundaryParam(None)
    return BoundaryParam(_c(v))


def _param_out(b: BoundaryParam):
    return "inf" if b.is_inf else _c_out(b.value)


def potential_from_dict(d: dict) -> Potential:
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError("potential needs a 'kind'")
    kind = d["kind"]
    dom = {"domain": _real_or_inf(d["domain"])} if "domain" in d else {}
    try:
        if kind == "zero":
            return Zero(**dom)
        if kind == "constant":
            return Constant(c=_c(d.get("c", 0)), **dom)
        if kind == "step":
            segs = [(float(s["a"]), _real_or_inf(s["b"]), _c(s["value"])) for s in d["segments"]]
            return Step(segments=tuple(segs), **dom)
        if kind == "exp_decay":
            return ExpDecay(amplitude=_c(d.get("amplitude", 1)), rate=float(d.get("rate", 1.0)),
                            offset=_c(d.get("offset", 0)), **dom)
        if kind == "table":
            return Table(xs=tuple(float(x) for x in d["xs"]),
                         values=tuple(_c(v) for v in d["values"]), **dom)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad {kind} potential: {exc}") from exc
    raise ConfigError(f"unknown potential kind {kind!r}")


def potential_to_dict(p: Potential) -> dict:
    d: dict = {"kind": p.kind}
    if math.isfinite(p.domain):
        d["domain"] = p.domain
    if isinstance(p, Constant):
        d["c"] = _c_out(p.c)
    elif isinstance(p, Step):
        d["segments"] = [{"a": a, "b": _real_out(b), "value": _c_out(v)} for a, b, v in p.segments]
    elif isinstance(p, ExpDecay):
        d.update(amplitude=_c_out(p.amplitude), rate=p.rate, offset=_c_out(p.offset))
    elif isinstance(p, Table):
        d.update(xs=list(p.xs), values=[_c_out(v) for v in p.values])
    elif not isinstance(p, Zero):
        raise ConfigError(f"cannot serialise potential kind {p.kind!r}")
    return d


def problem_from_dict(d: dict) -> Problem:
    if not isinstance(d, dict):
        raise ConfigError("problem must be a JSON object")
    known = {"potential", "alpha", "beta", "truncation", "step"}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}")
    kw = {}
    try:
        if "truncation" in d:
            kw["truncation"] = Truncation(**{k: float(v) for k, v in d["truncation"].items()})
        if "step" in d:
            kw["step"] = StepPolicy(**{k: float(v) for k, v in d["step"].items()})
        return Problem(potential=potential_from_dict(d.get("potential", {"kind": "zero"})),
                       alpha=_param(d.get("alpha", 0)),
                       beta=_param(d["beta"]) if "beta" in d else None, **kw)
    except (TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def problem_to_dict(p: Problem) -> dict:
    d = {"potential": potential_to_dict(p.potential), "alpha": _param_out(p.alpha)}
    if p.beta is not None:
        d["beta"] = _param_out(p.beta)
    t, s = p.truncation, p.step
    d["truncation"] = {"b_min": t.b_min, "b_max": t.b_max, "growth": t.growth}
    d["step"] = {"h_max": s.h_max, "c": s.c}
    return d


def load_problem(path) -> Problem:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return problem_from_dict(data)


def dumps_problem(p: Problem) -> str:
    return json.dumps(problem_to_dict(p), sort_keys=True, indent=2)


def loads_problem(text: str) -> Problem:
    try:
        return problem_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(str(exc)) from exc
