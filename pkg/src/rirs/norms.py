"""Rearrangement-invariant norms on step and analytic variables.

Three families share one evaluation contract through :class:`NormSpec`:

* ``lp:p`` for p in [1, inf]
* ``orlicz:<phi>`` (Luxemburg norm), phi in {exp, huber, power:<p>}
* ``appendix_b``: sup_n n 2**n * int_0^{s_n} X*,  s_n = 1/(2**n n!)

Inputs may be a :class:`StepVariable`, an :class:`AnalyticRearrangement`
(read as a non-negative variable), a :class:`SignedVariable` or a
:class:`DisjointSum`; only the law of |X| matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import special

from .analytic import (
    AnalyticRearrangement,
    DisjointSum,
    GSpec,
    SignedVariable,
    critical_lambda,
    integrate_g,
)
from .errors import EvaluationError, SpecError
from .measure import StepVariable, common_refinement, decreasing_rearrangement
from .orlicz import OrliczFunction, orlicz_conjugate

__all__ = [
    "NormSpec",
    "HeartMembership",
    "lp_norm",
    "luxemburg_norm",
    "appendix_b_norm",
    "appendix_b_terms",
    "heart_membership",
    "hardy_littlewood_sup",
    "orlicz_conjugate",
    "parse_orlicz",
    "l1_constant",
    "empirical_l1_constant",
]

N_MAX = 60


def parse_orlicz(text: str) -> OrliczFunction:
    text = text.strip().lower()
    if text == "exp":
        return OrliczFunction.exp()
    if text == "huber":
        return OrliczFunction.huber()
    if text.startswith("power:"):
        return OrliczFunction.power(float(text.split(":", 1)[1]))
    raise SpecError(f"unknown Orlicz function {text!r} (use exp, huber or power:<p>)")


@dataclass(frozen=True)
class NormSpec:
    tag: str
    p: float = 1.0
    phi: Optional[OrliczFunction] = None
    tol: float = 1e-12

    def __post_init__(self):
        if self.tag not in ("lp", "orlicz", "appendix_b"):
            raise SpecError(f"unknown norm tag {self.tag!r}")
        if self.tag == "lp" and not self.p >= 1:
            raise SpecError("Lp norms need p >= 1")
        if self.tag == "orlicz" and self.phi is None:
            raise SpecError("Orlicz norms need an Orlicz function")

    @classmethod
    def lp(cls, p=1.0) -> "NormSpec":
        return cls("lp", p=float(p))

    @classmethod
    def orlicz(cls, phi: OrliczFunction) -> "NormSpec":
        return cls("orlicz", phi=phi)

    @classmethod
    def appendix_b(cls) -> "NormSpec":
        return cls("appendix_b")

    @classmethod
    def parse(cls, text: str) -> "NormSpec":
        """Parse ``lp:2``, ``lp:inf``, ``orlicz:exp``, ``orlicz:power:3``, ``appendix_b``."""
        t = text.strip().lower()
        if t in ("appendix_b", "appendix-b", "appb"):
            return cls.appendix_b()
        if t.startswith("lp:"):
            arg = t[3:]
            return cls.lp(math.inf if arg in ("inf", "infinity") else float(arg))
        if t.startswith("orlicz:"):
            return cls.orlicz(parse_orlicz(t[7:]))
        raise SpecError(f"cannot parse norm {text!r}")

    @property
    def name(self) -> str:
        if self.tag == "lp":
            return "lp:inf" if self.p == math.inf else f"lp:{self.p:g}"
        if self.tag == "orlicz":
            return f"orlicz:{self.phi.name}"
        return "appendix_b"

    def __call__(self, X, trace: Optional[list] = None) -> float:
        return self.evaluate(X, trace)

    def evaluate(self, X, trace: Optional[list] = None):
        if self.tag == "lp":
            return lp_norm(X, self.p)
        if self.tag == "orlicz":
            return luxemburg_norm(X, self.phi, trace=trace)
        return appendix_b_norm(X, trace=trace)

    def unit_norm(self) -> float:
        """Norm of the constant 1."""
        if self.tag == "orlicz":
            return 1.0 / self.phi.inverse_at_one()
        return 1.0


# ---------------------------------------------------------------------------
# input plumbing


def _parts(X):
    """('step', StepVariable) or ('analytic', [rearrangements of disjoint pieces of |X|])."""
    if isinstance(X, StepVariable):
        return "step", X
    if isinstance(X, AnalyticRearrangement):
        return "analytic", [X]
    if isinstance(X, SignedVariable):
        if X.is_step:
            return "step", X.step
        return "analytic", [p for p in (X.neg, X.pos) if not p.is_zero]
    if isinstance(X, DisjointSum):
        return "analytic", [p for p in X.parts if not p.is_zero]
    raise SpecError(f"unsupported variable type {type(X).__name__}")


def _single_rearrangement(X) -> Optional[AnalyticRearrangement]:
    kind, parts = _parts(X)
    if kind == "step":
        return None
    if len(parts) == 0:
        return AnalyticRearrangement.zero()
    if len(parts) == 1:
        return parts[0]
    raise EvaluationError("this evaluation needs |X| as a single rearrangement")


# ---------------------------------------------------------------------------
# Lp


def lp_norm(X, p: float) -> float:
    kind, parts = _parts(X)
    if kind == "step":
        vals = [abs(float(v)) for v in parts.values]
        if p == math.inf:
            return max(vals)
        total = sum(float(w) * v ** p for w, v in zip(parts.widths, vals))
        return total ** (1.0 / p)
    if p == math.inf:
        return max((q.sup() for q in parts), default=0.0)
    total = 0.0
    for q in parts:
        total += integrate_g(q, GSpec.power(p))
        if total == math.inf:
            return math.inf
    return total ** (1.0 / p)


# ---------------------------------------------------------------------------
# Luxemburg


def _orlicz_moment(kind, parts, phi: OrliczFunction, lam: float) -> float:
    if kind == "step":
        w = np.array([float(x) for x in parts.widths])
        v = np.abs(np.array([float(x) for x in parts.values]))
        with np.errstate(over="ignore"):
            return float(np.sum(w * phi(v / lam)))
    total = 0.0
    for q in parts:
        total += integrate_g(q, GSpec.orlicz(phi, lam))
        if total == math.inf:
            return math.inf
    return total


def luxemburg_norm(X, phi: OrliczFunction, trace: Optional[list] = None, rtol: Optional[float] = None) -> float:
    """inf{lam > 0 : E[Phi(|X|/lam)] <= 1} by bracketing and bisection.

    Returns the feasible end of the final bracket, so the reported value
    always satisfies the moment constraint.
    """
    kind, parts = _parts(X)
    if rtol is None:
        rtol = 1e-12 if kind == "step" else 1e-8
    if kind == "step":
        sup = max(abs(float(v)) for v in parts.values)
        if sup == 0:
            return 0.0
    else:
        if not parts:
            return 0.0
        crit = max(critical_lambda(q.leading, phi) for q in parts)
        if crit == math.inf:
            return math.inf
        sup = max((q.sup() for q in parts), default=0.0)

    def moment(lam):
        m = _orlicz_moment(kind, parts, phi, lam)
        if trace is not None:
            trace.append({"lambda": lam, "moment": m})
        return m

    hi = max(1.0, sup if math.isfinite(sup) else 1.0)
    while moment(hi) > 1.0:
        hi *= 2.0
        if hi > 1e300:
            raise EvaluationError("Luxemburg bracket did not close")
    lo = hi / 2.0
    while moment(lo) <= 1.0:
        hi = lo
        lo /= 2.0
        if lo < 1e-300:
            return 0.0
    while (hi - lo) > rtol * hi:
        mid = 0.5 * (lo + hi)
        if moment(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# factorial-window norm (tag appendix_b)

_LN2 = math.log(2.0)


def _s_exact(n: int) -> Fraction:
    return Fraction(1, 2 ** n * math.factorial(n))


def _s_float(n: int) -> float:
    return math.exp(-(n * _LN2 + special.gammaln(n + 1.0)))


def _appb_step(X: StepVariable, trace):
    top = decreasing_rearrangement(X).cells
    w1 = top[0][0]
    exact = X.exact
    best = None
    n = 1
    while True:
        s = _s_exact(n)
        integral = X.top_integral(s)
        tau = n * 2 ** n * integral
        if not exact:
            tau = float(tau)
        if trace is not None:
            trace.append({"n": n, "tau": float(tau)})
        if best is None or tau > best:
            best = tau
        # beyond here X* is constant on (0, s_n]: tau_n = v1 n/n!, decreasing for n >= 2
        if n >= 2 and s <= w1:
            break
        n += 1
    return best


@dataclass
class WindowNormCertificate:
    value: float
    terms: list
    n_max: int
    tail_bound: float
    limit: Optional[float] = None
    attained: bool = True


def _tail_bound(seg, N: int):
    """(upper bound on sup_{n > N} tau_n, limit of tau_n or None) for the leading segment."""
    off = max(seg.offset, 0.0)
    lead = seg.left_value() if not seg.unbounded else math.inf

    def off_term(n):
        return off * n * math.exp(-special.gammaln(n + 1.0))

    if not seg.unbounded:
        return lead * (N + 1) * math.exp(-special.gammaln(N + 2.0)), None
    if seg.form == "power":
        b = seg.param

        def log_main(n):
            return math.log(n) + n * b * _LN2 + (b - 1) * special.gammaln(n + 1.0)

        n = N + 1
        while log_main(n + 1) - log_main(n) >= 0:
            n += 1
            if n > N + 10000:
                raise EvaluationError("power tail bound did not settle")
        peak = max(log_main(k) for k in range(N + 1, n + 1))
        return seg.scale * math.exp(peak) / (1 - b) + off_term(N + 1), None
    if seg.form == "logpow":
        p = seg.param

        def log_u(n):
            L = n * _LN2 + special.gammaln(n + 1.0)
            if L <= p:
                return math.inf
            return (math.log(n) + p * math.log(L) - special.gammaln(n + 1.0)
                    - math.log(1 - p / L))

        n = N + 1
        while not (math.isfinite(log_u(n)) and log_u(n + 1) < log_u(n)
                   and log_u(n + 2) - log_u(n + 1) < log_u(n + 1) - log_u(n)):
            n += 1
            if n > N + 10000:
                raise EvaluationError("log-power tail bound did not settle")
        peak = max(log_u(k) for k in range(N + 1, n + 1))
        return seg.scale * math.exp(peak) + off_term(N + 1), None
    # staircase: tau_n increases to 3 per unit of scale
    return 3.0 * seg.scale + off_term(N + 1), 3.0 * seg.scale


def _appb_analytic(q: AnalyticRearrangement, trace) -> WindowNormCertificate:
    if q.is_zero:
        return WindowNormCertificate(0.0, [], 0, 0.0)
    lead = q.leading
    N = N_MAX
    while _s_float(N) > lead.hi:
        N += 1
        if N > 170:
            raise EvaluationError("leading segment too short for the tail bound")
    terms = []
    for n in range(1, N + 1):
        integral = integrate_g(q, GSpec.power(1.0), min(_s_float(n), 1.0))
        tau = n * 2.0 ** n * integral
        terms.append(tau)
        if trace is not None:
            trace.append({"n": n, "tau": tau})
    head = max(terms)
    bound, limit = _tail_bound(lead, N)
    if limit is not None:
        value = max(head, limit)
        if bound > value + 1e-12 * value:
            raise EvaluationError(f"tail bound {bound} exceeds the certified sup {value}")
        return WindowNormCertificate(value, terms, N, bound, limit, attained=head >= limit)
    if bound <= head:
        return WindowNormCertificate(head, terms, N, bound)
    raise EvaluationError(f"window-norm tail bound inconclusive: tail <= {bound}, head max {head}")


def appendix_b_terms(X, trace=None) -> WindowNormCertificate:
    q = _single_rearrangement(X)
    if q is None:
        raise SpecError("use appendix_b_norm for step variables")
    return _appb_analytic(q, trace)


def appendix_b_norm(X, trace: Optional[list] = None):
    """sup_n n 2**n int_0^{s_n} X*; exact (Fraction) on rational step variables."""
    kind, parts = _parts(X)
    if kind == "step":
        return _appb_step(parts, trace)
    q = _single_rearrangement(X)
    return _appb_analytic(q, trace).value


# ---------------------------------------------------------------------------
# heart membership


@dataclass(frozen=True)
class HeartMembership:
    status: str  # InHeart | InSpaceNotHeart | NotInSpace
    margin: float = 0.0

    def __str__(self):
        return self.status if self.status != "InSpaceNotHeart" else f"{self.status}(lambda*={self.margin:g})"


def heart_membership(q: AnalyticRearrangement, phi: OrliczFunction) -> HeartMembership:
    """Classify int Phi(q/lam) < inf across lam from the leading segment's exponents."""
    if q.bounded:
        return HeartMembership("InHeart", 0.0)
    crit = critical_lambda(q.leading, phi)
    if crit == 0.0:
        return HeartMembership("InHeart", 0.0)
    if crit == math.inf:
        return HeartMembership("NotInSpace", math.inf)
    return HeartMembership("InSpaceNotHeart", crit)


# ---------------------------------------------------------------------------
# Hardy-Littlewood


def hardy_littlewood_sup(X: StepVariable, Y: StepVariable):
    """int_0^1 X* Y* dt with X*, Y* the decreasing rearrangements of |X|, |Y|."""
    widths, (a, b) = common_refinement(decreasing_rearrangement(X), decreasing_rearrangement(Y))
    return sum(w * x * y for w, x, y in zip(widths, a, b))


# ---------------------------------------------------------------------------
# L1 comparison constants


def l1_constant(spec: NormSpec) -> float:
    """C with ||X||_1 <= C ||X|| for every X.

    Lp: Hoelder on a probability space gives 1. Orlicz: Jensen gives
    Phi(E|X|/lam) <= 1, so C = Phi^{-1}(1). Window norm: tau_1 = 2 int_0^{1/2} X*
    dominates E|X| since X* is non-increasing, so C = 1.
    """
    if spec.tag == "orlicz":
        return spec.phi.inverse_at_one()
    return 1.0


def empirical_l1_constant(spec: NormSpec, samples) -> float:
    """max ||X||_1 / ||X|| over the given samples (a lower estimate of the best C)."""
    best = 0.0
    for X in samples:
        nx = float(spec.evaluate(X))
        if nx > 0:
            best = max(best, float(lp_norm(X, 1.0)) / nx)
    return best
