"""Named variables, norms and measures, and resolution of variable sources."""

from __future__ import annotations

import difflib
import json
from fractions import Fraction
from pathlib import Path

from .analytic import AnalyticRearrangement, SignedVariable
from .errors import SpecError
from .measure import StepVariable
from .norms import NormSpec
from .risk import RiskMeasureSpec

__all__ = [
    "VARIABLES",
    "NORMS",
    "MEASURES",
    "catalog_list",
    "resolve_variable",
    "resolve_norm",
    "resolve_measure",
    "parse_step_json",
]


def _neg(q):
    return lambda: SignedVariable.negative_of(q)


def _pos(q):
    return lambda: SignedVariable(pos=q)


def _step(values):
    return lambda: SignedVariable.from_step(StepVariable.uniform([Fraction(v) for v in values]))


# name -> (builder, description)
VARIABLES = {
    "neg-log-tail": (_neg(AnalyticRearrangement.log_power(1.0, 1.0)),
                     "X = -ln(1/U); X^- lies in L^exp but not in its heart"),
    "neg-sqrt-log-tail": (_neg(AnalyticRearrangement.log_power(1.0, 0.5)),
                          "X = -(ln(1/U))^(1/2); X^- lies in the exp-Orlicz heart"),
    "neg-log-squared": (_neg(AnalyticRearrangement.log_power(1.0, 2.0)),
                        "X = -(ln(1/U))^2; X^- is outside L^exp"),
    "appb-staircase": (_pos(AnalyticRearrangement.staircase(1)),
                       "sum_n n! 1_[c_{n+1}, c_n) with c_n = 1/(2^n (n+1)!); factorial-window norm 3, not order continuous"),
    "power-half": (_pos(AnalyticRearrangement.power(1.0, 0.5)),
                   "X = U^(-1/2); in L^p for p < 2 only"),
    "uniform4": (_step([1, 2, 3, 4]), "step variable with values 1, 2, 3, 4 on quarters"),
    "indicator-quarter": (lambda: SignedVariable.from_step(StepVariable.indicator(0, Fraction(1, 4))),
                          "indicator of (0, 1/4)"),
    "mixed4": (_step([-3, -1, 2, 5]), "step variable with values -3, -1, 2, 5 on quarters"),
}

NORMS = {
    "lp:1": "L^1 norm",
    "lp:2": "L^2 norm",
    "lp:inf": "essential supremum",
    "orlicz:exp": "Luxemburg norm for Phi(t) = e^t - 1",
    "orlicz:huber": "Luxemburg norm for the Huber-type Phi (quadratic then linear)",
    "orlicz:power:3": "Luxemburg norm for Phi(t) = t^3 (equals the L^3 norm)",
    "appendix_b": "sup_n n 2^n int_0^{s_n} X*, s_n = 1/(2^n n!)",
}

MEASURES = {
    "es:0.25": "expected shortfall at level 1/4",
    "es:0.5": "expected shortfall at level 1/2",
    "mean": "rho(X) = -E[X]",
    "distortion:power:0.5": "Choquet integral with g(u) = u^(1/2)",
    "example21:orlicz:exp": "d(X^-, order-continuous part of L^exp) - E[X]; fails the Fatou property",
    "supphi": "sup over copies of E[w X'] construction with weights w = (0, 1, 2) on thirds",
    "square": "E[X^2]; not coherent, used as a negative control",
}


def catalog_list() -> dict:
    return {
        "variables": {k: d for k, (_, d) in VARIABLES.items()},
        "norms": dict(NORMS),
        "measures": dict(MEASURES),
    }


def _unknown(kind: str, name: str, names) -> SpecError:
    near = difflib.get_close_matches(name, list(names), n=1)
    hint = f"; did you mean {near[0]!r}?" if near else ""
    return SpecError(f"unknown {kind} {name!r}{hint}")


def parse_step_json(data) -> StepVariable:
    """A list of values (equal cells), a list of [width, value] pairs, or a step-variable dict."""
    if isinstance(data, dict):
        return StepVariable.from_json(data)
    if isinstance(data, list) and data and all(isinstance(v, list) and len(v) == 2 for v in data):
        return StepVariable(tuple((Fraction(str(w)), Fraction(str(v))) for w, v in data))
    if isinstance(data, list) and data:
        return StepVariable.uniform([Fraction(str(v)) for v in data])
    raise SpecError("a step variable needs a non-empty list or a step-variable object")


def _from_json(data):
    if isinstance(data, dict) and data.get("kind") in ("signed", "analytic"):
        return SignedVariable.from_json(data)
    return SignedVariable.from_step(parse_step_json(data))


def resolve_variable(source: str):
    """``catalog:NAME``, ``file:PATH`` (JSON) or inline JSON; bare catalog names are accepted."""
    src = source.strip()
    if src.startswith("catalog:") or src in VARIABLES:
        name = src.split(":", 1)[1] if src.startswith("catalog:") else src
        if name not in VARIABLES:
            raise _unknown("variable", name, VARIABLES)
        return VARIABLES[name][0]()
    if src.startswith("file:"):
        path = Path(src[5:])
        try:
            text = path.read_text()
        except OSError as exc:
            raise SpecError(f"cannot read variable file {path}: {exc}") from exc
        try:
            return _from_json(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    if src[:1] in "[{":
        try:
            return _from_json(json.loads(src))
        except json.JSONDecodeError as exc:
            raise SpecError(f"inline variable: invalid JSON at column {exc.colno} ({exc.msg})") from exc
    raise _unknown("variable", src, VARIABLES)


def resolve_norm(text: str) -> NormSpec:
    try:
        return NormSpec.parse(text)
    except (SpecError, ValueError):
        raise _unknown("norm", text, NORMS) from None


def resolve_measure(text: str, weights=None) -> RiskMeasureSpec:
    try:
        return RiskMeasureSpec.parse(text, weights=weights)
    except (SpecError, ValueError, ZeroDivisionError):
        raise _unknown("measure", text, MEASURES) from None
