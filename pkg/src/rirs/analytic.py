"""Closed-form decreasing rearrangements with unbounded tails.

An :class:`AnalyticRearrangement` is a non-increasing, non-negative function
on (0, sigma] (zero beyond sigma) assembled from segments. Each segment is

    value(t) = scale * base(u) + offset,   u = t  (or u = 1 - t if reflected)

with ``base`` one of

    const      1
    power      u**(-b),           0 < b < 1
    logpow     (ln 1/u)**p,       p > 0
    staircase  n! on [c_{n+1}, c_n),  c_n = 1 / (2**n (n+1)!),  0 for u >= 1/4

Reflected segments (with non-positive scale) appear when a signed variable is
shifted by a constant; they are always bounded.

Integrals of g(q) use closed forms where the catalog has them and adaptive
quadrature in the variable v = ln(u_hi/u) otherwise. Divergence at u -> 0 is
decided from exponents, never from overflow.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import integrate, special

from .errors import DomainError, EvaluationError, StructureError
from .measure import StepVariable, decreasing_rearrangement
from .orlicz import OrliczFunction

__all__ = [
    "Segment",
    "AnalyticRearrangement",
    "SignedVariable",
    "DisjointSum",
    "GSpec",
    "integrate_g",
    "truncate",
    "critical_lambda",
    "staircase_c",
    "staircase_log_c",
]

_FORMS = ("const", "power", "logpow", "staircase")
_NMAX = 1200
# ELL[n] = -ln c_n, increasing in n
_N = np.arange(_NMAX + 1)
ELL = _N * math.log(2.0) + special.gammaln(_N + 2.0)
_LOG_FACT = special.gammaln(_N + 1.0)


def staircase_log_c(n: int) -> float:
    return -float(ELL[n])


def staircase_c(n: int) -> float:
    """c_n = 1 / (2**n (n+1)!) as a float (underflows to 0 for large n)."""
    return math.exp(-float(ELL[n]))


def _snap(ell: float) -> float:
    i = int(np.searchsorted(ELL, ell))
    for j in (i - 1, i):
        if 0 <= j <= _NMAX and abs(ELL[j] - ell) <= 1e-12 * max(1.0, abs(ell)):
            return float(ELL[j])
    return ell


def _stair_level(ell: float, side: str = "left") -> int:
    """Level n with u = e^-ell in [c_{n+1}, c_n); side='right' gives the limit from u below."""
    ell = _snap(ell)
    i = int(np.searchsorted(ELL, ell, side=side)) - 1
    return max(i, 0)


def _stair_width(n: int) -> float:
    """c_n - c_{n+1} for n >= 1, via c_n (1 - 1/(2(n+2)))."""
    return math.exp(-float(ELL[n])) * (1.0 - 1.0 / (2.0 * (n + 2)))


def _fact(n: int) -> float:
    return math.exp(_LOG_FACT[n]) if n <= 170 else math.inf


def _base_from_ell(form: str, param: float, ell):
    ell = np.asarray(ell, dtype=float)
    if form == "const":
        return np.ones_like(ell)
    if form == "power":
        with np.errstate(over="ignore"):
            return np.exp(param * ell)
    if form == "logpow":
        return np.power(np.maximum(ell, 0.0), param)
    # staircase
    snapped = np.vectorize(_snap)(ell) if ell.ndim else np.asarray(_snap(float(ell)))
    idx = np.searchsorted(ELL, snapped, side="left") - 1
    idx = np.clip(idx, 0, _NMAX)
    with np.errstate(over="ignore"):
        vals = np.where(idx <= 170, np.exp(_LOG_FACT[np.minimum(idx, 170)]), np.inf)
    return np.where(idx >= 1, vals, 0.0)


def _log_base_from_ell(form: str, param: float, ell: float) -> float:
    if form == "const":
        return 0.0
    if form == "power":
        return param * ell
    if form == "logpow":
        return param * math.log(ell) if ell > 0 else -math.inf
    n = _stair_level(ell)
    return float(_LOG_FACT[n]) if n >= 1 else -math.inf


@dataclass(frozen=True)
class Segment:
    form: str
    lo: float
    hi: float
    scale: float = 1.0
    offset: float = 0.0
    param: float = 0.0
    reflect: bool = False

    def __post_init__(self):
        if self.form not in _FORMS:
            raise StructureError(f"unknown segment form {self.form!r}")
        if not 0.0 <= self.lo < self.hi <= 1.0:
            raise StructureError(f"bad segment interval ({self.lo}, {self.hi}]")
        if self.form == "power" and not 0.0 < self.param < 1.0:
            raise StructureError("power segments need 0 < b < 1")
        if self.form == "logpow" and not self.param > 0.0:
            raise StructureError("log-power segments need p > 0")
        if self.form == "staircase" and self.reflect:
            raise StructureError("reflected staircase segments are not supported")
        if self.form != "const":
            if not self.reflect and self.scale < 0:
                raise StructureError("unreflected segments need scale >= 0")
            if self.reflect and self.scale > 0:
                raise StructureError("reflected segments need scale <= 0")

    # coordinates
    def u_interval(self):
        if self.reflect:
            return 1.0 - self.hi, 1.0 - self.lo
        return self.lo, self.hi

    def _ell_of_t(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            if self.reflect:
                return -np.log1p(-t)
            return -np.log(t)

    def value(self, t):
        ell = self._ell_of_t(t)
        return self.scale * _base_from_ell(self.form, self.param, ell) + self.offset

    def value_from_ell_u(self, ell):
        return self.scale * _base_from_ell(self.form, self.param, ell) + self.offset

    def log_value_from_ell_u(self, ell: float) -> float:
        """log of the value where it overflows a float (scale > 0, value dominated by the base)."""
        lead = math.log(self.scale) + _log_base_from_ell(self.form, self.param, ell)
        return lead + math.log1p(self.offset * math.exp(-lead))

    @property
    def unbounded(self) -> bool:
        ua, _ = self.u_interval()
        return ua == 0.0 and self.form != "const" and self.scale > 0

    def left_value(self) -> float:
        """Limit of the value as t decreases to lo."""
        if self.form == "const":
            return self.scale + self.offset
        ua, ub = self.u_interval()
        u = ub if self.reflect else ua
        if u == 0.0:
            return math.inf if self.scale > 0 else self.offset
        ell = -math.log(u)
        if self.form == "staircase":
            n = _stair_level(ell, "left")
            return self.scale * (_fact(n) if n >= 1 else 0.0) + self.offset
        return float(self.value_from_ell_u(ell))

    def right_value(self) -> float:
        """Limit of the value as t increases to hi."""
        if self.form == "const":
            return self.scale + self.offset
        ua, ub = self.u_interval()
        u = ua if self.reflect else ub
        if u == 0.0:
            return math.inf if self.scale > 0 else self.offset
        ell = -math.log(u)
        if self.form == "staircase":
            n = _stair_level(ell, "right")
            return self.scale * (_fact(n) if n >= 1 else 0.0) + self.offset
        return float(self.value_from_ell_u(ell))

    def restricted(self, lo: float, hi: float) -> "Segment":
        return replace(self, lo=lo, hi=hi)

    def affine(self, a: float, c: float) -> "Segment":
        """value -> a * value + c (a >= 0 keeps orientation)."""
        if self.form == "const":
            return replace(self, scale=a * (self.scale + self.offset) + c, offset=0.0)
        return replace(self, scale=a * self.scale, offset=a * self.offset + c)

    def mirrored(self) -> "Segment":
        """Reflect the domain t -> 1 - t (orientation must be fixed by a sign flip)."""
        return Segment(self.form, 1.0 - self.hi, 1.0 - self.lo, self.scale, self.offset,
                       self.param, not self.reflect)

    def crossing(self, y: float, strict: bool = True) -> float:
        """t* in [lo, hi] with value > y (>= y if not strict) exactly on (lo, t*)."""
        def above(v):
            return v > y if strict else v >= y

        if self.form == "const":
            return self.hi if above(self.scale + self.offset) else self.lo
        if self.scale == 0:
            return self.hi if above(self.offset) else self.lo
        k = (y - self.offset) / self.scale
        # threshold u* with base(u) > k  <=>  u < u*   (for >=, the same up to null sets
        # except on staircase plateaus)
        if self.form == "power":
            ustar = math.inf if k <= 0 else math.exp(-math.log(k) / self.param)
        elif self.form == "logpow":
            ustar = math.inf if k < 0 else (math.inf if k == 0 and not strict else math.exp(-k ** (1.0 / self.param)))
        else:
            if self.scale > 0:
                if (k < 0) or (k <= 0 and not strict):
                    ustar = math.inf
                else:
                    n0 = 1
                    while n0 <= 170 and not (_fact(n0) > k if strict else _fact(n0) >= k):
                        n0 += 1
                    ustar = staircase_c(n0) if n0 <= 170 else 0.0
            else:
                raise StructureError("staircase with non-positive scale")
        if not self.reflect:
            return min(max(ustar, self.lo), self.hi)
        return min(max(1.0 - ustar, self.lo), self.hi)

    def to_json(self) -> dict:
        return {
            "form": self.form, "lo": self.lo, "hi": self.hi, "scale": self.scale,
            "offset": self.offset, "param": self.param, "reflect": self.reflect,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Segment":
        return cls(d["form"], float(d["lo"]), float(d["hi"]), float(d.get("scale", 1.0)),
                   float(d.get("offset", 0.0)), float(d.get("param", 0.0)),
                   bool(d.get("reflect", False)))


@dataclass(frozen=True)
class AnalyticRearrangement:
    """Non-increasing non-negative q on (0,1), zero after the last segment."""

    segments: tuple = ()

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            return
        if segs[0].lo != 0.0:
            raise StructureError("first segment must start at 0")
        for a, b in zip(segs, segs[1:]):
            if a.hi != b.lo:
                raise StructureError(f"segments not contiguous at {a.hi} / {b.lo}")
        for s in segs:
            r = s.right_value()
            if r < -1e-12 * max(1.0, abs(s.offset)):
                raise StructureError(f"segment on ({s.lo}, {s.hi}] goes negative ({r})")
        for a, b in zip(segs, segs[1:]):
            ra, lb = a.right_value(), b.left_value()
            if lb > ra + 1e-9 * max(1.0, abs(ra)):
                raise StructureError(f"not non-increasing at t={a.hi}: {ra} then {lb}")

    # construction helpers
    @classmethod
    def zero(cls) -> "AnalyticRearrangement":
        return cls(())

    @classmethod
    def constant(cls, c: float, support: float = 1.0) -> "AnalyticRearrangement":
        return cls((Segment("const", 0.0, support, scale=c),)) if c != 0 else cls.zero()

    @classmethod
    def log_power(cls, c: float = 1.0, p: float = 1.0, support: float = 1.0) -> "AnalyticRearrangement":
        """c * (ln 1/t)**p on (0, support]."""
        return cls((Segment("logpow", 0.0, support, scale=c, param=p),))

    @classmethod
    def power(cls, a: float, b: float, support: float = 1.0) -> "AnalyticRearrangement":
        """a * t**(-b) on (0, support]."""
        return cls((Segment("power", 0.0, support, scale=a, param=b),))

    @classmethod
    def staircase(cls, first_level: int = 1) -> "AnalyticRearrangement":
        """sum_{n >= first_level} n! 1_[c_{n+1}, c_n)  on (0, c_{first_level}]."""
        return cls((Segment("staircase", 0.0, staircase_c(first_level)),))

    # basic queries
    @property
    def support(self) -> float:
        return self.segments[-1].hi if self.segments else 0.0

    @property
    def is_zero(self) -> bool:
        return not self.segments

    @property
    def leading(self) -> Optional[Segment]:
        return self.segments[0] if self.segments else None

    @property
    def bounded(self) -> bool:
        return not self.segments or not self.segments[0].unbounded

    def sup(self) -> float:
        return self.segments[0].left_value() if self.segments else 0.0

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for s in self.segments:
            mask = (t > s.lo) & (t <= s.hi)
            if np.any(mask):
                out = np.where(mask, s.value(np.where(mask, t, s.hi)), out)
        return out if out.ndim else float(out)

    def median(self) -> float:
        return float(self.value(0.5)) if self.support >= 0.5 else 0.0

    # reshaping
    def _cut(self, T: float) -> tuple:
        out = []
        for s in self.segments:
            if s.lo >= T:
                break
            out.append(s if s.hi <= T else s.restricted(s.lo, T))
        return tuple(out)

    def _threshold(self, y: float, strict: bool) -> float:
        """T such that q > y (or >= y) exactly on (0, T)."""
        T = 0.0
        for s in self.segments:
            t = s.crossing(y, strict)
            if t < s.hi:
                return t
            T = s.hi
        return T

    def restrict_support(self, s: float) -> "AnalyticRearrangement":
        return AnalyticRearrangement(self._cut(s))

    def excess(self, r: float) -> "AnalyticRearrangement":
        """(q - r)^+."""
        if r <= 0:
            return self if r == 0 else AnalyticRearrangement(
                tuple(s.affine(1.0, -r) for s in self.segments)
            )
        T = self._threshold(r, strict=True)
        return AnalyticRearrangement(tuple(s.affine(1.0, -r) for s in self._cut(T)))

    def restrict_above(self, r: float) -> "AnalyticRearrangement":
        """q * 1_{q >= r}."""
        T = self._threshold(r, strict=False)
        return AnalyticRearrangement(self._cut(T))

    def clip_above(self, n: float) -> "AnalyticRearrangement":
        """min(q, n)."""
        if n <= 0:
            return AnalyticRearrangement.zero()
        T = self._threshold(n, strict=True)
        if T <= 0.0:
            if self.bounded:
                return self
            # the set {q > n} is below float resolution; keep the result bounded
            T = math.ulp(0.0)
        rest = []
        for s in self.segments:
            if s.hi <= T:
                continue
            rest.append(s if s.lo >= T else s.restricted(T, s.hi))
        return AnalyticRearrangement((Segment("const", 0.0, T, scale=float(n)),) + tuple(rest))

    def scaled(self, a: float) -> "AnalyticRearrangement":
        if a < 0:
            raise DomainError("rearrangements scale by non-negative factors only")
        if a == 0:
            return AnalyticRearrangement.zero()
        return AnalyticRearrangement(tuple(s.affine(a, 0.0) for s in self.segments))

    # integrals
    def integral(self, s: float = 1.0) -> float:
        """Integral of q over (0, s]; equals the top integral since q is decreasing."""
        return integrate_g(self, GSpec.power(1.0), s)

    top_integral = integral

    def mean(self) -> float:
        return self.integral(1.0)

    def to_json(self) -> dict:
        return {"kind": "analytic", "segments": [s.to_json() for s in self.segments]}

    @classmethod
    def from_json(cls, d: dict) -> "AnalyticRearrangement":
        if d.get("kind") != "analytic":
            raise StructureError("expected kind 'analytic'")
        return cls(tuple(Segment.from_json(s) for s in d["segments"]))


# ---------------------------------------------------------------------------
# integrands


@dataclass(frozen=True)
class GSpec:
    """Integrand catalog for :func:`integrate_g`.

    power    g(x) = x**k, k > 0
    orlicz   g(x) = Phi(x / lam)
    product  g(q)(t) = q(t) * other(t) for another rearrangement ``other``
    """

    kind: str
    k: float = 1.0
    phi: Optional[OrliczFunction] = None
    lam: float = 1.0
    other: Optional[AnalyticRearrangement] = field(default=None, compare=False)

    @classmethod
    def power(cls, k: float = 1.0) -> "GSpec":
        return cls("power", k=float(k))

    @classmethod
    def orlicz(cls, phi: OrliczFunction, lam: float = 1.0) -> "GSpec":
        return cls("orlicz", phi=phi, lam=float(lam))

    @classmethod
    def product(cls, other: AnalyticRearrangement) -> "GSpec":
        return cls("product", other=other)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "power":
            return np.power(x, self.k)
        if self.kind == "orlicz":
            return self.phi(x / self.lam)
        raise EvaluationError("product integrands are not pointwise functions")

    def log_value(self, x: float) -> float:
        if x <= 0:
            return -math.inf
        if self.kind == "power":
            return self.k * math.log(x)
        return float(self.phi.log_value(x / self.lam))

    def log_value_from_log(self, lx: float) -> float:
        """log g(x) given log x, for x beyond float range."""
        if self.kind == "power":
            return self.k * lx
        kind, p = self.phi.growth
        if kind == "exp":
            return math.inf
        # power-type Phi (t**p, or huber's t - 1/2) at leading order
        return p * (lx - math.log(self.lam))


def _growth_exponent(g: GSpec):
    """Growth class of g: ('power', k) or ('exp', None)."""
    if g.kind == "power":
        return ("power", g.k)
    return g.phi.growth


def critical_lambda(seg: Segment, phi: OrliczFunction) -> float:
    """lambda* with  int_0 Phi(seg/lambda) < inf  iff  lambda > lambda*  (seg at u -> 0)."""
    if not seg.unbounded:
        return 0.0
    kind, p = phi.growth
    if kind == "power":
        if seg.form == "power":
            return 0.0 if seg.param * p < 1 else math.inf
        if seg.form == "logpow":
            return 0.0
        return 0.0 if p <= 1 else math.inf
    if seg.form in ("power", "staircase"):
        return math.inf
    if seg.param < 1:
        return 0.0
    if seg.param > 1:
        return math.inf
    return seg.scale


def _diverges_at_zero(seg: Segment, g: GSpec) -> bool:
    if not seg.unbounded:
        return False
    if g.kind == "orlicz":
        return g.lam <= critical_lambda(seg, g.phi)
    if g.kind == "power":
        return critical_lambda(seg, OrliczFunction.power(max(g.k, 1.0))) > 0 if g.k >= 1 else (
            seg.form == "power" and seg.param * g.k >= 1
        )
    raise EvaluationError("product integrands are classified jointly")


def _pow_int(gamma: float, a: float, b: float) -> float:
    """int_a^b u**(-gamma) du for 0 <= a < b."""
    if a == 0.0:
        if gamma >= 1:
            return math.inf
        return math.exp((1 - gamma) * math.log(b)) / (1 - gamma)
    if gamma == 1:
        return math.log(b / a)
    return (math.exp((1 - gamma) * math.log(b)) - math.exp((1 - gamma) * math.log(a))) / (1 - gamma)


def _upper_gamma(s: float, x: float) -> float:
    """Gamma(s, x) = int_x^inf v**(s-1) e**-v dv."""
    if x == math.inf:
        return 0.0
    return float(special.gammaincc(s, x) * special.gamma(s))


def _logpow_int(q: float, a: float, b: float) -> float:
    """int_a^b (ln 1/u)**q du."""
    la = math.inf if a == 0.0 else -math.log(a)
    lb = -math.log(b)
    return _upper_gamma(q + 1.0, lb) - _upper_gamma(q + 1.0, la)


def _stair_terms(a: float, b: float):
    """(level, overlap width) for staircase levels meeting (a, b] in u-coordinates."""
    b = min(b, 0.25)
    if b <= a:
        return []
    nb = _stair_level(-math.log(b), "right")
    na = _NMAX if a == 0.0 else _stair_level(-math.log(a), "left")
    out = []
    for n in range(nb, min(na, _NMAX) + 1):
        hi = min(b, staircase_c(n))
        lo = max(a, staircase_c(n + 1))
        if n > nb and (a == 0.0 or n < na) and hi == staircase_c(n) and lo == staircase_c(n + 1):
            w = _stair_width(n)
        else:
            w = hi - lo
        if w > 0:
            out.append((n, w))
        if a == 0.0 and n > nb + 400:
            break
    return out


def _stair_identity_int(a: float, b: float) -> float:
    """int_a^b staircase(u) du, using n!(c_n - c_{n+1}) = (1 - 1/(2(n+2))) / (2**n (n+1))."""
    total = 0.0
    for n, w in _stair_terms(a, b):
        full = (n > 0) and abs(w - _stair_width(n)) <= 1e-15 * _stair_width(n)
        if full:
            total += (1.0 - 1.0 / (2.0 * (n + 2))) / ((n + 1.0) * 2.0 ** n)
        elif n >= 1:
            total += math.exp(_LOG_FACT[n] + math.log(w))
    return total


def _closed_form(seg: Segment, g: GSpec, ua: float, ub: float):
    """Closed-form value of int g(seg) du over (ua, ub], or None when unavailable."""
    width = ub - ua
    if seg.form == "const":
        return float(g(seg.scale + seg.offset)) * width
    kind, expo = _growth_exponent(g)
    lam = g.lam if g.kind == "orlicz" else 1.0
    if g.kind == "power" or (g.kind == "orlicz" and g.phi.kind == "power"):
        k = g.k if g.kind == "power" else g.phi.p
        if seg.offset != 0.0:
            if seg.form == "staircase" and k == 1:
                return (seg.scale * _stair_identity_int(ua, ub) + seg.offset * width) / lam
            return None
        coef = (seg.scale / lam) ** k
        if seg.form == "power":
            return coef * _pow_int(seg.param * k, ua, ub)
        if seg.form == "logpow":
            return coef * _logpow_int(seg.param * k, ua, ub)
        if k == 1:
            return coef * _stair_identity_int(ua, ub)
        return None
    if g.kind == "orlicz" and g.phi.kind == "exp":
        if seg.form == "logpow" and seg.param == 1.0:
            alpha = seg.scale / lam
            logfac = seg.offset / lam
            main = _pow_int(alpha, ua, ub)
            if main == math.inf:
                return math.inf
            return math.exp(logfac + math.log(main)) - width
        return None
    return None


def _stair_sum(seg: Segment, g: GSpec, ua: float, ub: float) -> float:
    total = 0.0
    for n, w in _stair_terms(ua, ub):
        v = seg.scale * (_fact(n) if n >= 1 else 0.0) + seg.offset
        if v == math.inf:
            if ua == 0.0:
                break  # convergent case: remaining levels are below 2**-170
            return math.inf
        lg = g.log_value(v)
        if lg == -math.inf:
            continue
        term = math.exp(lg + math.log(w)) if lg + math.log(w) < 709 else math.inf
        total += term
        if total == math.inf:
            return math.inf
    return total


_SPLITS = (0.0, 1.0, 8.0, 64.0, 512.0, 4096.0)


def _quad_split(f, V: float):
    """Adaptive quadrature of f over [0, V] on geometrically split pieces."""
    total, err = 0.0, 0.0
    cuts = [c for c in _SPLITS if c < V] + [V]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(cuts, cuts[1:]):
            r, e = integrate.quad(f, a, b, limit=400, epsabs=0.0, epsrel=1e-12)
            total += r
            err += e
            if math.isinf(total):
                return math.inf, 0.0
    return total, err


def _quad_u(seg: Segment, g: GSpec, ua: float, ub: float) -> float:
    """Quadrature in v = ln(ub/u): int_ua^ub g(seg(u)) du = ub int_0^V g(...) e^-v dv."""
    lb = -math.log(ub)
    V = math.inf if ua == 0.0 else math.log(ub / ua)
    logub = math.log(ub)

    def f(v):
        val = float(seg.value_from_ell_u(lb + v))
        if val == math.inf and seg.scale > 0:
            lg = g.log_value_from_log(seg.log_value_from_ell_u(lb + v))
        else:
            lg = g.log_value(val)
        if lg == -math.inf:
            return 0.0
        e = lg + logub - v
        return math.exp(e) if e < 709 else math.inf

    res, err = _quad_split(f, V)
    if math.isinf(res):
        return math.inf
    if not math.isfinite(res) or err > 1e-7 * abs(res) + 1e-300:
        raise EvaluationError(
            f"quadrature did not converge on segment ({seg.lo}, {seg.hi}] form={seg.form}: "
            f"value={res}, error estimate={err}"
        )
    return res


def _segment_integral(seg: Segment, g: GSpec, lo: float, hi: float) -> float:
    part = seg.restricted(lo, hi)
    ua, ub = part.u_interval()
    if part.unbounded and _diverges_at_zero(part, g):
        return math.inf
    closed = _closed_form(part, g, ua, ub)
    if closed is not None:
        return closed
    if part.form == "staircase":
        return _stair_sum(part, g, ua, ub)
    return _quad_u(part, g, ua, ub)


def _product_integral(q: AnalyticRearrangement, other: AnalyticRearrangement, s: float) -> float:
    cuts = sorted({0.0, s} | {x.hi for x in q.segments if x.hi < s} | {x.hi for x in other.segments if x.hi < s})
    cuts = [c for c in cuts if c <= min(s, q.support, other.support)] or [0.0]
    end = min(s, q.support, other.support)
    if cuts[-1] != end:
        cuts.append(end)
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        if b <= a:
            continue
        s1 = next(x for x in q.segments if x.lo <= a < x.hi)
        s2 = next(x for x in other.segments if x.lo <= a < x.hi)
        if s1.form == "const" or s2.form == "const":
            c, f = (s1, s2) if s1.form == "const" else (s2, s1)
            total += (c.scale + c.offset) * _segment_integral(f, GSpec.power(1.0), a, b)
            continue
        if "staircase" in (s1.form, s2.form):
            raise EvaluationError("no decision rule for a staircase times a non-constant factor")
        if a == 0.0 and s1.unbounded and s2.unbounded:
            if s1.form == "power" and s2.form == "power" and s1.param + s2.param >= 1:
                return math.inf
        lb = -math.log(b)
        V = math.inf if a == 0.0 else math.log(b / a)

        def f(v, s1=s1, s2=s2, lb=lb, b=b):
            ell = lb + v
            t = math.exp(-ell)
            v1 = float(s1.value_from_ell_u(ell if not s1.reflect else -math.log1p(-t)))
            v2 = float(s2.value_from_ell_u(ell if not s2.reflect else -math.log1p(-t)))
            if v1 <= 0 or v2 <= 0:
                return 0.0
            e = math.log(v1) + math.log(v2) + math.log(b) - v
            return math.exp(e) if e < 709 else math.inf

        res, err = _quad_split(f, V)
        if not math.isfinite(res) or err > 1e-7 * abs(res) + 1e-300:
            raise EvaluationError(f"product quadrature failed on ({a}, {b}]: {res} +- {err}")
        total += res
    return total


def integrate_g(q, g: GSpec, s: float = 1.0) -> float:
    """int_0^s g(q(t)) dt for a rearrangement (analytic or step), +inf if divergent.

    For a step variable the integrand is applied to its decreasing rearrangement
    and the result is an exact finite sum.
    """
    if not 0.0 < s <= 1.0:
        raise DomainError(f"upper limit must lie in (0, 1], got {s}")
    if isinstance(q, StepVariable):
        if g.kind == "product":
            raise EvaluationError("product integrands need analytic inputs")
        total = 0.0
        left = s
        for w, v in decreasing_rearrangement(q).cells:
            if left <= 0:
                break
            take = min(float(w), left)
            total += float(g(float(v))) * take
            left -= take
        return total
    if g.kind == "product":
        return _product_integral(q, g.other, s)
    total = 0.0
    for seg in q.segments:
        if seg.lo >= s:
            break
        val = _segment_integral(seg, g, seg.lo, min(seg.hi, s))
        total += val
        if total == math.inf:
            return math.inf
    return total


# ---------------------------------------------------------------------------
# signed variables


def _concat_clip_positive(pieces) -> AnalyticRearrangement:
    """Assemble segments in t-order and keep the prefix where the value is > 0."""
    pieces = [p for p in pieces if p.hi > p.lo]
    if not pieces:
        return AnalyticRearrangement.zero()
    T = 0.0
    for p in pieces:
        t = p.crossing(0.0, strict=True)
        if t < p.hi:
            T = t
            break
        T = p.hi
    out = []
    for p in pieces:
        if p.lo >= T:
            break
        out.append(p if p.hi <= T else p.restricted(p.lo, T))
    return AnalyticRearrangement(tuple(out))


def _mirror_negated(r: AnalyticRearrangement, c: float):
    """Segments of  c - r(1 - t)  on (1 - support, 1], in t-order."""
    out = []
    for s in reversed(r.segments):
        if s.form == "const":
            out.append(Segment("const", 1.0 - s.hi, 1.0 - s.lo, scale=c - (s.scale + s.offset)))
        else:
            out.append(Segment(s.form, 1.0 - s.hi, 1.0 - s.lo, -s.scale, c - s.offset,
                               s.param, not s.reflect))
    return out


@dataclass(frozen=True)
class SignedVariable:
    """A random variable given either by a step function or by analytic parts.

    Analytic layout: X(t) = -neg(t) for t in (0, sigma_neg], X(t) = pos(1 - t)
    for t in [1 - sigma_pos, 1), zero in between. The parts therefore have
    disjoint supports and X^- = neg, X^+ = pos as rearrangements.
    """

    neg: Optional[AnalyticRearrangement] = None
    pos: Optional[AnalyticRearrangement] = None
    step: Optional[StepVariable] = None

    def __post_init__(self):
        if self.step is not None:
            if self.neg is not None or self.pos is not None:
                raise StructureError("give either a step variable or analytic parts")
            return
        neg = self.neg if self.neg is not None else AnalyticRearrangement.zero()
        pos = self.pos if self.pos is not None else AnalyticRearrangement.zero()
        if neg.support + pos.support > 1.0 + 1e-15:
            raise StructureError("positive and negative parts overlap")
        object.__setattr__(self, "neg", neg)
        object.__setattr__(self, "pos", pos)

    @classmethod
    def from_step(cls, X: StepVariable) -> "SignedVariable":
        return cls(step=X)

    @classmethod
    def negative_of(cls, q: AnalyticRearrangement) -> "SignedVariable":
        """X = -q(U)."""
        return cls(neg=q)

    @property
    def is_step(self) -> bool:
        return self.step is not None

    def negative_part(self):
        return self.step.negative_part() if self.is_step else self.neg

    def positive_part(self):
        return self.step.positive_part() if self.is_step else self.pos

    def mean(self) -> float:
        if self.is_step:
            return self.step.mean()
        return self.pos.integral(1.0) - self.neg.integral(1.0) if not self.pos.is_zero else -self.neg.integral(1.0) if not self.neg.is_zero else 0.0

    @property
    def bounded(self) -> bool:
        return self.is_step or (self.neg.bounded and self.pos.bounded)

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.is_step:
            # cells in layout order, each read as (left, right]
            edges = np.array([float(b) for b in self.step.breakpoints()[1:-1]])
            vals = np.array([float(v) for v in self.step.values])
            return vals[np.searchsorted(edges, t, side="left")]
        return -self.neg.value(t) + self.pos.value(1.0 - t)

    def truncate(self, n: float) -> "SignedVariable":
        if n < 0:
            raise DomainError("truncation level must be >= 0")
        if self.is_step:
            return SignedVariable(step=self.step.truncate(n))
        return SignedVariable(neg=self.neg.clip_above(n), pos=self.pos.clip_above(n))

    def scale(self, a: float) -> "SignedVariable":
        if self.is_step:
            return SignedVariable(step=self.step.scale(a))
        if a >= 0:
            return SignedVariable(neg=self.neg.scaled(a), pos=self.pos.scaled(a))
        return SignedVariable(neg=self.pos.scaled(-a), pos=self.neg.scaled(-a))

    def shift(self, m: float) -> "SignedVariable":
        """X + m, re-expressed in the disjoint-parts layout."""
        if self.is_step:
            return SignedVariable(step=self.step.shift(m))
        if m == 0:
            return self
        sn, sp = self.neg.support, self.pos.support
        mid_lo, mid_hi = sn, 1.0 - sp
        neg_pieces = [s.affine(1.0, -m) for s in self.neg.segments]
        if m < 0 and mid_hi > mid_lo:
            neg_pieces.append(Segment("const", mid_lo, mid_hi, scale=-m))
        if m < 0:
            neg_pieces += _mirror_negated(self.pos, -m)
        pos_pieces = [s.affine(1.0, m) for s in self.pos.segments]
        if m > 0 and mid_hi > mid_lo:
            pos_pieces.append(Segment("const", 1.0 - mid_hi, 1.0 - mid_lo, scale=m))
        if m > 0:
            pos_pieces += _mirror_negated(self.neg, m)
        return SignedVariable(neg=_concat_clip_positive(neg_pieces),
                              pos=_concat_clip_positive(pos_pieces))

    def __add__(self, m):
        return self.shift(m)

    def __neg__(self):
        return self.scale(-1.0)

    def to_json(self) -> dict:
        if self.is_step:
            return self.step.to_json()
        return {"kind": "signed", "neg": self.neg.to_json(), "pos": self.pos.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> "SignedVariable":
        kind = d.get("kind")
        if kind == "step":
            return cls(step=StepVariable.from_json(d))
        if kind == "analytic":
            return cls(neg=AnalyticRearrangement.from_json(d))
        if kind == "signed":
            return cls(neg=AnalyticRearrangement.from_json(d["neg"]),
                       pos=AnalyticRearrangement.from_json(d["pos"]))
        raise StructureError(f"unknown variable kind {kind!r}")


@dataclass(frozen=True)
class DisjointSum:
    """Non-negative variable made of disjointly supported rearranged parts.

    Only the law matters for r.i. norms; moment-type norms add over parts.
    """

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        object.__setattr__(self, "parts", parts)
        total = sum(p.support for p in parts)
        if total > 1.0 + 1e-12:
            raise StructureError(f"parts need total support <= 1, got {total}")


def truncate(X, n: float):
    """Pointwise median(-n, X, n) for step or signed variables."""
    if isinstance(X, StepVariable):
        return X.truncate(n)
    if isinstance(X, SignedVariable):
        return X.truncate(n)
    if isinstance(X, AnalyticRearrangement):
        return X.clip_above(n)
    raise StructureError(f"cannot truncate {type(X).__name__}")
