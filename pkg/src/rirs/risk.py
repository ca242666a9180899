"""Law-invariant risk measures on step variables, the sup-over-copies functional
phi, and a randomized tester for the coherence axioms.

Sign convention: positions are gains and rho is a capital requirement, so a
coherent rho is decreasing, subadditive, positively homogeneous and satisfies
rho(X + m) = rho(X) - m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .analytic import AnalyticRearrangement, SignedVariable
from .errors import PreconditionError, SpecError
from .measure import StepVariable, common_refinement, random_rearrangement, signed_decreasing_rearrangement
from .norms import NormSpec

__all__ = [
    "Distortion",
    "RiskMeasureSpec",
    "expected_shortfall",
    "distortion_rho",
    "phi_sup",
    "counterexample_rho",
    "geometric_discretization",
    "discretization_profile",
    "coherence_suite",
    "lower_integral",
    "random_step",
]


def _alpha(alpha) -> Fraction:
    a = Fraction(str(alpha)) if isinstance(alpha, float) else Fraction(alpha)
    if not 0 < a <= 1:
        raise SpecError(f"alpha must lie in (0, 1], got {alpha}")
    return a


def _as_step(X) -> StepVariable:
    if isinstance(X, StepVariable):
        return X
    if isinstance(X, SignedVariable) and X.is_step:
        return X.step
    raise SpecError("this measure is defined on step variables only")


def lower_integral(X, alpha) -> float:
    """int_0^alpha q_X(t) dt, the integral of the lower alpha-quantiles.

    Exact on step variables. For analytic signed variables the layout is
    already the quantile function (increasing in t).
    """
    if isinstance(X, SignedVariable) and not X.is_step:
        a = float(alpha)
        total = -X.neg.integral(min(a, X.neg.support)) if not X.neg.is_zero else 0.0
        top = 1.0 - X.pos.support
        if a > top and not X.pos.is_zero:
            total += X.pos.integral(X.pos.support) - (X.pos.integral(1.0 - a) if a < 1.0 else 0.0)
        return total
    X = _as_step(X)
    a = Fraction(alpha) if not isinstance(alpha, float) else Fraction(str(alpha))
    left = a
    total = 0
    for v, w in X.aggregate():
        if left <= 0:
            break
        take = w if w < left else left
        total += take * v
        left -= take
    return total


def expected_shortfall(X, alpha):
    """ES_alpha(X) = -(1/alpha) int_0^alpha q_X(t) dt."""
    a = _alpha(alpha)
    val = lower_integral(X, a)
    if isinstance(val, float):
        return -val / float(a)
    return -val / a


@dataclass(frozen=True)
class Distortion:
    """Distortion g on [0,1] with g(0)=0, g(1)=1, non-decreasing.

    kinds: es (min(u/alpha, 1)), power (u**gamma), dual_power (1-(1-u)**k),
    identity, custom (``fn``).
    """

    kind: str
    param: float = 1.0
    fn: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("es", "power", "dual_power", "identity", "custom"):
            raise SpecError(f"unknown distortion {self.kind!r}")
        if self.kind == "custom" and self.fn is None:
            raise SpecError("custom distortions need a function")
        if self.kind == "es":
            _alpha(self.param)
        if self.kind in ("power", "dual_power") and not self.param > 0:
            raise SpecError("distortion exponent must be positive")
        grid = [Fraction(i, 64) for i in range(65)]
        vals = [float(self(u)) for u in grid]
        if abs(vals[0]) > 1e-15 or abs(vals[-1] - 1) > 1e-15:
            raise SpecError("distortion needs g(0) = 0 and g(1) = 1")
        if any(b < a - 1e-15 for a, b in zip(vals, vals[1:])):
            raise SpecError("distortion must be non-decreasing")

    @property
    def concave(self) -> bool:
        return self.kind in ("es", "identity") or (self.kind == "power" and self.param <= 1) or (
            self.kind == "dual_power" and self.param >= 1
        )

    def __call__(self, u):
        if self.kind == "identity":
            return u
        if self.kind == "es":
            a = _alpha(self.param)
            return min(u / a, 1) if not isinstance(u, float) else min(u / float(a), 1.0)
        if self.kind == "power":
            p = self.param
            if float(p).is_integer() and not isinstance(u, float):
                return u ** int(p)
            return float(u) ** p
        if self.kind == "dual_power":
            k = self.param
            if float(k).is_integer() and not isinstance(u, float):
                return 1 - (1 - u) ** int(k)
            return 1.0 - (1.0 - float(u)) ** k
        return self.fn(u)

    @property
    def name(self) -> str:
        return self.kind if self.kind in ("identity", "custom") else f"{self.kind}:{self.param:g}"


def distortion_rho(X, g: Distortion):
    """Choquet integral of the loss -X under the capacity g(P)."""
    X = _as_step(X)
    agg = X.aggregate()  # ascending in value = descending in loss
    total = 0
    cum = Fraction(0)
    prev = g(cum)
    for v, w in agg:
        cum += w
        cur = g(cum)
        total += (-v) * (cur - prev)
        prev = cur
    return total


def _check_weights(w: StepVariable):
    for i, v in enumerate(w.values):
        if v < 0:
            raise PreconditionError(f"weight {v} < 0 in cell {i}", witness=i)


def phi_sup(w: StepVariable, X: StepVariable):
    """sup over X' ~ X of E[w X'] = int_0^1 w^dec X^dec (signed rearrangements)."""
    _check_weights(w)
    widths, (a, b) = common_refinement(signed_decreasing_rearrangement(w), signed_decreasing_rearrangement(X))
    return sum(x * y * c for c, x, y in zip(widths, a, b))


def counterexample_rho(w: StepVariable, X: StepVariable):
    """phi(-X) - E[X]."""
    return phi_sup(w, -X) - X.mean()


def _base_exponent(v: float, base: float) -> int:
    """Largest integer m with base**m < v (v > 0)."""
    m = math.ceil(math.log(v) / math.log(base)) - 1
    while base ** (m + 1) < v:
        m += 1
    while base ** m >= v:
        m -= 1
    return m


def geometric_discretization(X: StepVariable, a, base=None) -> StepVariable:
    """Round X down onto the grid {a**n}: (a**n, a**(n+1)] -> a**n and
    [-a**(n+1), -a**n) -> -a**(n+1); zero stays zero. The result U satisfies
    X/a <= U <= X on {X > 0} and a X <= U <= X on {X < 0}.

    With ``base`` given, a must be base**e for an integer e >= 1 and grid
    points are computed as base**(integer), so grids for nested ratios share
    their points exactly.
    """
    a = float(a)
    if not a > 1:
        raise SpecError("grid ratio must exceed 1")
    if base is None:
        base, e = a, 1
    else:
        base = float(base)
        e = round(math.log(a) / math.log(base))
        if e < 1 or abs(base ** e - a) > 1e-12 * a:
            raise SpecError(f"ratio {a} is not an integer power of {base}")

    def rnd(v):
        v = float(v)
        if v == 0:
            return 0.0
        if v > 0:
            m = _base_exponent(v, base)
            return base ** (e * (m // e))
        # -a**(n+1) <= v < -a**n  with n the grid index below |v|
        m = _base_exponent(-v, base)
        return -(base ** (e * (m // e + 1)))

    return X.map(rnd)


def discretization_profile(w: StepVariable, X: StepVariable, base: float = 1.01, levels: int = 6) -> dict:
    """phi values of X rounded onto the nested grids with ratios base**(2**k), k = levels..0.

    Each grid refines the previous one, so the rounded variables increase
    pointwise and so do their phi values.
    """
    target = float(phi_sup(w, X))
    exps = [2 ** k for k in range(levels, -1, -1)]
    ratios = [float(base) ** e for e in exps]
    raw = [float(phi_sup(w, geometric_discretization(X, a, base=base))) for a in ratios]
    return {
        "ratios": ratios,
        "values": raw,
        "target": target,
        "final_gap": target - raw[-1],
        "monotone": all(b >= a for a, b in zip(raw, raw[1:])),
        "sandwich_ok": raw[-1] <= target + 1e-12 * max(1.0, abs(target)),
    }


# ---------------------------------------------------------------------------
# measure specs


@dataclass(frozen=True)
class RiskMeasureSpec:
    """Tagged risk measure: es, distortion, example21, supphi, mean, custom."""

    tag: str
    alpha: Fraction = Fraction(1)
    distortion: Optional[Distortion] = None
    norm: Optional[NormSpec] = None
    weights: Optional[StepVariable] = None
    fn: Optional[Callable] = field(default=None, compare=False)
    label: str = ""

    def __post_init__(self):
        if self.tag not in ("es", "distortion", "example21", "supphi", "mean", "custom"):
            raise SpecError(f"unknown measure tag {self.tag!r}")
        if self.tag == "es":
            object.__setattr__(self, "alpha", _alpha(self.alpha))
        if self.tag == "supphi" and self.weights is not None:
            _check_weights(self.weights)

    @classmethod
    def es(cls, alpha) -> "RiskMeasureSpec":
        return cls("es", alpha=_alpha(alpha))

    @classmethod
    def mean(cls) -> "RiskMeasureSpec":
        return cls("mean")

    @classmethod
    def from_distortion(cls, g: Distortion) -> "RiskMeasureSpec":
        return cls("distortion", distortion=g)

    @classmethod
    def example21(cls, norm: NormSpec) -> "RiskMeasureSpec":
        return cls("example21", norm=norm)

    @classmethod
    def supphi(cls, weights: StepVariable) -> "RiskMeasureSpec":
        return cls("supphi", weights=weights)

    @classmethod
    def custom(cls, label: str, fn: Callable) -> "RiskMeasureSpec":
        return cls("custom", fn=fn, label=label)

    @classmethod
    def parse(cls, text: str, weights: Optional[StepVariable] = None) -> "RiskMeasureSpec":
        """``es:0.5``, ``mean``, ``distortion:power:0.5``, ``distortion:dual_power:2``,
        ``example21:orlicz:exp``, ``supphi`` (needs weights), ``square`` (non-coherent E[X^2])."""
        t = text.strip().lower()
        if t == "mean":
            return cls.mean()
        if t.startswith("es:"):
            return cls.es(Fraction(t[3:]))
        if t.startswith("distortion:"):
            rest = t[len("distortion:"):]
            kind, _, par = rest.partition(":")
            return cls.from_distortion(Distortion(kind, float(Fraction(par)) if par else 1.0))
        if t.startswith("example21:"):
            return cls.example21(NormSpec.parse(t[len("example21:"):]))
        if t == "supphi":
            if weights is None:
                weights = StepVariable.uniform([0, 1, 2])
            return cls.supphi(weights)
        if t == "square":
            return cls.custom("square", lambda X: _as_step(X).map(lambda v: v * v).mean())
        raise SpecError(f"cannot parse measure {text!r}")

    @property
    def name(self) -> str:
        if self.tag == "es":
            return f"es:{self.alpha}"
        if self.tag == "distortion":
            return f"distortion:{self.distortion.name}"
        if self.tag == "example21":
            return f"example21:{self.norm.name}"
        if self.tag == "custom":
            return self.label or "custom"
        return self.tag

    @property
    def positively_homogeneous(self) -> bool:
        return self.tag != "custom"

    def __call__(self, X):
        return self.evaluate(X)

    def evaluate(self, X):
        if self.tag == "mean":
            return -(X.mean() if not isinstance(X, AnalyticRearrangement) else X.mean())
        if self.tag == "es":
            return expected_shortfall(X, self.alpha)
        if self.tag == "distortion":
            return distortion_rho(X, self.distortion)
        if self.tag == "supphi":
            return counterexample_rho(self.weights, _as_step(X))
        if self.tag == "custom":
            return self.fn(X)
        from .order import example21_rho

        return example21_rho(X, self.norm)


# ---------------------------------------------------------------------------
# coherence tester


def random_step(rng, max_cells: int = 6, span: int = 10, den: int = 4, exact: bool = True) -> StepVariable:
    """Random step variable with rational widths and (optionally) rational values."""
    n = int(rng.integers(1, max_cells + 1))
    raw = rng.integers(1, 5, size=n)
    total = int(raw.sum())
    widths = [Fraction(int(r), total) for r in raw]
    if exact:
        vals = [Fraction(int(rng.integers(-span * den, span * den + 1)), den) for _ in range(n)]
    else:
        vals = [float(x) for x in rng.uniform(-span, span, size=n)]
    return StepVariable(tuple(zip(widths, vals)))


def _close(a, b, tol=1e-12) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return abs(float(a) - float(b)) <= tol * max(1.0, abs(float(a)), abs(float(b)))


def _le(a, b, tol=1e-12) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a <= b
    return float(a) <= float(b) + tol * max(1.0, abs(float(a)), abs(float(b)))


AXIOMS = ("monotonicity", "subadditivity", "positive_homogeneity", "cash_invariance", "law_invariance")


def coherence_suite(rho: RiskMeasureSpec, trials: int = 1000, seed: int = 0, axioms=AXIOMS) -> dict:
    """Randomized check of the coherence axioms plus law invariance.

    Every trial draws fresh rational inputs from a per-trial seed. Failures
    are collected with the first witness per axiom; nothing is raised.
    """
    results = {a: {"trials": 0, "violations": 0, "witness": None} for a in axioms}

    def record(name, ok, witness):
        r = results[name]
        r["trials"] += 1
        if not ok:
            r["violations"] += 1
            if r["witness"] is None:
                r["witness"] = witness

    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        X = random_step(rng)
        Y = random_step(rng)
        rx = rho(X)
        if "monotonicity" in axioms:
            Z = random_step(rng).map(abs)
            big = X + Z
            r_big = rho(big)
            record("monotonicity", _le(r_big, rx), {"X": X.to_json(), "X_plus_nonneg": big.to_json(),
                                                      "rho_X": float(rx), "rho_bigger": float(r_big)})
        if "subadditivity" in axioms:
            ry, rs = rho(Y), rho(X + Y)
            record("subadditivity", _le(rs, rx + ry), {"X": X.to_json(), "Y": Y.to_json(),
                                                        "rho_sum": float(rs), "sum_rho": float(rx + ry)})
        if "positive_homogeneity" in axioms:
            lam = Fraction(int(rng.integers(1, 13)), int(rng.integers(1, 5)))
            r_l = rho(X.scale(lam))
            record("positive_homogeneity", _close(r_l, lam * rx), {"X": X.to_json(), "lambda": str(lam),
                                                                  "lhs": float(r_l), "rhs": float(lam * rx)})
        if "cash_invariance" in axioms:
            m = Fraction(int(rng.integers(-20, 21)), 4)
            r_m = rho(X.shift(m))
            record("cash_invariance", _close(r_m, rx - m), {"X": X.to_json(), "m": str(m),
                                                           "lhs": float(r_m), "rhs": float(rx - m)})
        if "law_invariance" in axioms:
            Xc = random_rearrangement(X, seed=[seed, t, 1], max_splits=3)
            r_c = rho(Xc)
            record("law_invariance", _close(r_c, rx), {"X": X.to_json(), "copy": Xc.to_json(),
                                                      "lhs": float(r_c), "rhs": float(rx)})
    return {
        "measure": rho.name,
        "trials": trials,
        "seed": seed,
        "axioms": results,
        "all_pass": all(r["violations"] == 0 for r in results.values()),
    }
