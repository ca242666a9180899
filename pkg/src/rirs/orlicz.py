"""Orlicz functions: a small closed catalog with evaluation, derivatives and conjugates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import SpecError

__all__ = ["OrliczFunction", "orlicz_conjugate", "golden_section_max"]

_KINDS = ("power", "exp", "huber")


@dataclass(frozen=True)
class OrliczFunction:
    """Convex increasing Phi with Phi(0) = 0.

    kinds:
      power  Phi(t) = t**p, p >= 1
      exp    Phi(t) = e**t - 1
      huber  Phi(t) = t**2/2 for t <= 1, t - 1/2 beyond (linear growth)
    """

    kind: str
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise SpecError(f"unknown Orlicz kind {self.kind!r}")
        if self.kind == "power" and not self.p >= 1:
            raise SpecError("power Orlicz function needs p >= 1")
        self._check_shape()

    @classmethod
    def power(cls, p) -> "OrliczFunction":
        return cls("power", float(p))

    @classmethod
    def exp(cls) -> "OrliczFunction":
        return cls("exp")

    @classmethod
    def huber(cls) -> "OrliczFunction":
        return cls("huber")

    @property
    def name(self) -> str:
        if self.kind == "power":
            return f"power:{self.p:g}"
        return self.kind

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "power":
            out = np.power(x, self.p)
        elif self.kind == "exp":
            with np.errstate(over="ignore"):
                out = np.expm1(x)
        else:
            out = np.where(x <= 1.0, 0.5 * x * x, x - 0.5)
        return out if out.ndim else float(out)

    def derivative(self, x):
        """Right derivative."""
        x = np.asarray(x, dtype=float)
        if self.kind == "power":
            out = self.p * np.power(x, self.p - 1) if self.p != 1 else np.ones_like(x)
        elif self.kind == "exp":
            with np.errstate(over="ignore"):
                out = np.exp(x)
        else:
            out = np.where(x < 1.0, x, 1.0)
        return out if out.ndim else float(out)

    def log_value(self, x):
        """log Phi(x) computed without overflow for large x; -inf at 0."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "power":
                out = self.p * np.log(x)
            elif self.kind == "exp":
                out = x + np.log(-np.expm1(-x))
            else:
                out = np.where(x <= 1.0, np.log(0.5 * x * x), np.log(x - 0.5))
        return out if out.ndim else float(out)

    def inverse_at_one(self) -> float:
        """The t with Phi(t) = 1."""
        if self.kind == "power":
            return 1.0
        if self.kind == "exp":
            return math.log(2.0)
        return 1.5

    @property
    def growth(self):
        """Asymptotic class used by the divergence classifier."""
        if self.kind == "power":
            return ("power", self.p)
        if self.kind == "exp":
            return ("exp", None)
        return ("power", 1.0)

    @property
    def slope_at_infinity(self) -> float:
        if self.kind == "power" and self.p == 1:
            return 1.0
        if self.kind == "huber":
            return 1.0
        return math.inf

    def _check_shape(self):
        grid = np.logspace(-6, 2, 400)
        vals = self(grid)
        if abs(float(self(0.0))) > 0:
            raise SpecError("Phi(0) must be 0")
        if np.any(np.diff(vals) < 0):
            raise SpecError("Phi must be increasing")
        # convexity on a log grid: slopes of secants must not decrease
        slopes = np.diff(vals) / np.diff(grid)
        if np.any(np.diff(slopes) < -1e-9 * np.maximum(1.0, np.abs(slopes[1:]))):
            raise SpecError("Phi must be convex")


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 500):
    """Maximize a unimodal function on [lo, hi]; returns (argmax, max)."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    best = max((fc, c), (fd, d), (f(a), a), (f(b), b))
    return best[1], best[0]


def orlicz_conjugate(phi: OrliczFunction, s: float, numeric: bool = False) -> float:
    """Psi(s) = sup_{t >= 0} (s t - Phi(t)).

    Closed forms for the power and exp entries; golden-section search on a
    bracket from Phi' otherwise (or when ``numeric`` is set). Returns +inf
    when s exceeds the asymptotic slope of Phi.
    """
    if s < 0:
        raise SpecError("conjugate argument must be >= 0")
    if s == 0:
        return 0.0
    if s > phi.slope_at_infinity:
        return math.inf
    if not numeric:
        if phi.kind == "power":
            p = phi.p
            if p == 1:
                return 0.0
            return (p - 1) * (s / p) ** (p / (p - 1))
        if phi.kind == "exp":
            return s * math.log(s) - s + 1 if s >= 1 else 0.0
    if phi.slope_at_infinity == s:
        # sup approached at infinity; evaluate the monotone limit
        t = 1.0
        prev = s * t - float(phi(t))
        for _ in range(200):
            t *= 2
            cur = s * t - float(phi(t))
            if abs(cur - prev) <= 1e-15 * max(1.0, abs(cur)):
                return cur
            prev = cur
        return prev
    # bracket: Phi'(hi) > s, so the concave objective peaks before hi
    hi = 1.0
    while float(phi.derivative(hi)) <= s:
        hi *= 2
        if hi > 1e300:
            return math.inf
    t, val = golden_section_max(lambda t: s * t - float(phi(t)), 0.0, hi)
    return max(val, 0.0)
