"""Distance to the order-continuous part and the risk measure built on it.

For a non-negative X the distance to the order-continuous part is
inf_r ||(X - r)^+||, evaluated along a geometric ladder r_k = 2**k r_0. The
ladder values are the primary output; for catalog inputs the limit is also
known in closed form and the two are cross-checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .analytic import AnalyticRearrangement, DisjointSum, SignedVariable
from .errors import ConsistencyError, SpecError
from .measure import StepVariable
from .norms import NormSpec, critical_lambda, heart_membership

__all__ = [
    "TailProfile",
    "DistanceCertificate",
    "tail_norm_profile",
    "distance_certificate",
    "distance_to_oc_part",
    "example21_rho",
    "closed_form_limit",
]

_MONO_RTOL = 1e-7


@dataclass
class TailProfile:
    thresholds: list
    norms: list
    limit: Optional[float]
    limit_method: str
    monotone: bool
    status: str = "ok"
    band: float = 0.0

    def to_json(self) -> dict:
        return {
            "thresholds": self.thresholds, "norms": self.norms, "limit": self.limit,
            "limit_method": self.limit_method, "monotone": self.monotone,
            "status": self.status, "band": self.band,
        }


@dataclass
class DistanceCertificate:
    value: float
    ladder_r: list = field(default_factory=list)
    ladder_values: list = field(default_factory=list)
    method: str = "ladder"
    converged: bool = True
    band: float = 0.0
    note: str = ""

    def to_json(self) -> dict:
        return {
            "value": self.value, "ladder_r": self.ladder_r, "ladder_values": self.ladder_values,
            "method": self.method, "converged": self.converged, "band": self.band, "note": self.note,
        }


def _nonneg_parts(Xneg):
    """Normalize the caller's non-negative input to ('step', X) or ('analytic', parts)."""
    if isinstance(Xneg, StepVariable):
        if any(v < 0 for v in Xneg.values):
            raise SpecError("distance input must be non-negative (pass the negative part)")
        return "step", Xneg
    if isinstance(Xneg, AnalyticRearrangement):
        return "analytic", [Xneg] if not Xneg.is_zero else []
    if isinstance(Xneg, DisjointSum):
        return "analytic", [p for p in Xneg.parts if not p.is_zero]
    if isinstance(Xneg, SignedVariable):
        if Xneg.is_step:
            return _nonneg_parts(Xneg.step)
        if not Xneg.neg.is_zero:
            raise SpecError("distance input must be non-negative (pass the negative part)")
        return "analytic", [Xneg.pos] if not Xneg.pos.is_zero else []
    raise SpecError(f"unsupported input {type(Xneg).__name__}")


def _assemble(parts):
    parts = [p for p in parts if not p.is_zero]
    if not parts:
        return AnalyticRearrangement.zero()
    return parts[0] if len(parts) == 1 else DisjointSum(tuple(parts))


def closed_form_limit(parts, norm: NormSpec) -> Optional[float]:
    """lim_r ||(X - r)^+|| (equivalently lim ||X 1_{X >= r}||) for catalog inputs.

    Orlicz: the critical scale lambda* of the unbounded pieces (0 in the heart).
    Lp, p finite: 0 whenever the norm is finite. Window norm: 3 x staircase scale.
    """
    unbounded = [p for p in parts if not p.bounded]
    if not unbounded:
        return 0.0
    if norm.tag == "orlicz":
        return max(critical_lambda(p.leading, norm.phi) for p in unbounded)
    if norm.tag == "lp":
        if norm.p == math.inf:
            return math.inf
        return 0.0
    if len(parts) != 1:
        return None
    lead = parts[0].leading
    if lead.form == "staircase":
        return 3.0 * lead.scale
    return 0.0


def _check_monotone(values, label):
    for i, (a, b) in enumerate(zip(values, values[1:])):
        if b > a + _MONO_RTOL * max(1.0, abs(a)):
            raise ConsistencyError(f"{label} increased at rung {i + 1}: {a} -> {b}")


def distance_certificate(Xneg, norm: NormSpec, r0: Optional[float] = None, max_rungs: int = 40) -> DistanceCertificate:
    """inf_r ||(X - r)^+|| for non-negative X, with the ladder that supports it."""
    kind, parts = _nonneg_parts(Xneg)
    if kind == "step":
        return DistanceCertificate(0.0, method="bounded", note="step variables are bounded")
    if not parts:
        return DistanceCertificate(0.0, method="zero")
    if all(p.bounded for p in parts):
        return DistanceCertificate(0.0, method="bounded", note="bounded input lies in the order-continuous part")
    limit = closed_form_limit(parts, norm)
    if limit == math.inf:
        return DistanceCertificate(math.inf, method="not-in-space", converged=True)
    if r0 is None:
        r0 = max((p.median() for p in parts), default=0.0)
        if r0 <= 0:
            r0 = 1.0
    rs, vals = [], []
    r = r0
    converged = False
    for _ in range(max_rungs):
        shifted = _assemble([p.excess(r) for p in parts])
        support = max((p.support for p in (shifted.parts if isinstance(shifted, DisjointSum) else [shifted])),
                      default=0.0)
        if support < 1e-290:
            converged = True
            break
        v = float(norm.evaluate(shifted))
        rs.append(r)
        vals.append(v)
        if v == math.inf:
            return DistanceCertificate(math.inf, rs, vals, method="not-in-space")
        if v == 0.0:
            converged = True
            break
        if len(vals) >= 3:
            a, b, c = vals[-3:]
            if abs(a - c) <= 1e-8 * max(abs(c), 1e-300) and abs(b - c) <= 1e-8 * max(abs(c), 1e-300):
                converged = True
                break
        r *= 2.0
    _check_monotone(vals, "ladder value")
    if limit is not None:
        last = vals[-1]
        if last < limit - 1e-6 * max(1.0, limit):
            raise ConsistencyError(f"ladder value {last} fell below the closed-form limit {limit}")
        return DistanceCertificate(limit, rs, vals, method="closed-form", converged=converged,
                                   band=max(0.0, last - limit))
    # Aitken extrapolation on the last three rungs
    if len(vals) >= 3:
        a, b, c = vals[-3:]
        den = a - 2 * b + c
        est = c - (c - b) ** 2 / den if den != 0 else c
        est = min(max(est, 0.0), c)
        return DistanceCertificate(est, rs, vals, method="extrapolated", converged=converged, band=abs(c - est))
    return DistanceCertificate(vals[-1], rs, vals, method="ladder", converged=converged)


def distance_to_oc_part(Xneg, norm: NormSpec, r0: Optional[float] = None) -> float:
    return distance_certificate(Xneg, norm, r0).value


def tail_norm_profile(X, norm: NormSpec, thresholds) -> TailProfile:
    """||X 1_{|X| >= r}|| for each threshold r, with its limit as r -> inf."""
    thresholds = [float(r) for r in thresholds]
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])) or (thresholds and thresholds[0] < 0):
        raise SpecError("thresholds must be strictly increasing and >= 0")
    if isinstance(X, StepVariable) or (isinstance(X, SignedVariable) and X.is_step):
        S = X if isinstance(X, StepVariable) else X.step
        vals = [float(norm.evaluate(S.map(lambda v, r=r: v if abs(v) >= r else 0 * v))) for r in thresholds]
        _check_monotone(vals, "tail norm")
        return TailProfile(thresholds, vals, 0.0, "bounded", True)
    if isinstance(X, SignedVariable):
        parts = [p for p in (X.neg, X.pos) if not p.is_zero]
    elif isinstance(X, AnalyticRearrangement):
        parts = [X] if not X.is_zero else []
    else:
        parts = [p for p in X.parts if not p.is_zero]
    vals = []
    for r in thresholds:
        vals.append(float(norm.evaluate(_assemble([p.restrict_above(r) for p in parts]))))
    if vals and vals[0] == math.inf:
        return TailProfile(thresholds, vals, math.inf, "none", True, status="NotInSpace")
    _check_monotone(vals, "tail norm")
    limit = closed_form_limit(parts, norm)
    if limit is not None:
        if vals and vals[-1] < limit - 1e-6 * max(1.0, limit):
            raise ConsistencyError(f"tail norm {vals[-1]} below the closed-form limit {limit}")
        return TailProfile(thresholds, vals, limit, "closed-form", True,
                           band=(vals[-1] - limit) if vals else 0.0)
    if len(vals) >= 3:
        a, b, c = vals[-3:]
        den = a - 2 * b + c
        est = c - (c - b) ** 2 / den if den != 0 else c
        est = min(max(est, 0.0), c)
        return TailProfile(thresholds, vals, est, "extrapolated", True, band=abs(c - est))
    return TailProfile(thresholds, vals, vals[-1] if vals else None, "ladder", True)


def example21_rho(X, norm: NormSpec) -> float:
    """d(X^-, order-continuous part) - E[X]."""
    if isinstance(X, StepVariable):
        return -float(X.mean())
    if isinstance(X, SignedVariable):
        if X.is_step:
            return -float(X.step.mean())
        d = distance_to_oc_part(X.neg, norm)
        return d - X.mean()
    raise SpecError(f"unsupported input {type(X).__name__}")
