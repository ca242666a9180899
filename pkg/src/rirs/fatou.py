"""Fatou-property probes: evaluate rho along dominated sequences converging to X."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .analytic import SignedVariable, truncate
from .errors import ConsistencyError, PreconditionError, SpecError
from .measure import StepVariable, common_refinement
from .order import distance_to_oc_part
from .risk import RiskMeasureSpec, lower_integral

__all__ = ["FatouProbeReport", "fatou_probe_truncation", "fatou_probe_lemma31"]

STABLE_RTOL = 1e-7


@dataclass
class FatouProbeReport:
    measure: str
    variable: str
    kind: str
    levels: list
    values: list
    rho_X: float
    liminf: float
    gap: float
    stabilized: bool
    verdict: str
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "measure": self.measure, "variable": self.variable, "kind": self.kind,
            "levels": self.levels, "values": self.values, "rho_X": self.rho_X,
            "liminf": self.liminf, "gap": self.gap, "stabilized": self.stabilized,
            "verdict": self.verdict, "diagnostics": self.diagnostics,
        }


def _describe(X) -> str:
    if isinstance(X, StepVariable):
        return f"step({len(X)} cells)"
    if isinstance(X, SignedVariable):
        if X.is_step:
            return f"step({len(X.step)} cells)"
        return f"analytic(neg={len(X.neg.segments)} seg, pos={len(X.pos.segments)} seg)"
    return type(X).__name__


def _verdict(values, rho_x, tol):
    tail = values[-4:]
    changes = [abs(b - a) / max(1.0, abs(b)) for a, b in zip(tail, tail[1:])]
    stabilized = len(changes) == 3 and all(c < STABLE_RTOL for c in changes)
    liminf = min(values[-3:])
    gap = rho_x - liminf
    if not stabilized:
        verdict = "INCONCLUSIVE"
    elif gap > tol:
        verdict = "FATOU_FAILS"
    else:
        verdict = "FATOU_HOLDS_ALONG_PROBE"
    return liminf, gap, stabilized, verdict, changes


def fatou_probe_truncation(rho: RiskMeasureSpec, X, levels=range(1, 41), tol: float = 1e-6) -> FatouProbeReport:
    """rho along X_n = median(-n, X, n); the gap is rho(X) - liminf rho(X_n)."""
    levels = list(levels)
    if len(levels) < 4:
        raise SpecError("need at least four truncation levels")
    rho_x = float(rho(X))
    values = [float(rho(truncate(X, n))) for n in levels]
    liminf, gap, stable, verdict, changes = _verdict(values, rho_x, tol)
    return FatouProbeReport(rho.name, _describe(X), "truncation", levels, values, rho_x, liminf, gap,
                            stable, verdict, {"last_relative_changes": changes, "tolerance": tol})


def _build_step_yn(X: StepVariable, Y: StepVariable, c, a) -> StepVariable:
    """X + c off (0, a], Y on (0, a]."""
    widths, (xv, yv) = common_refinement(X, Y)
    cells = []
    left = Fraction(0)
    for w, x, y in zip(widths, xv, yv):
        right = left + w
        if right <= a:
            cells.append((w, y))
        elif left >= a:
            cells.append((w, x + c))
        else:
            cells.append((a - left, y))
            cells.append((right - a, x + c))
        left = right
    return StepVariable(tuple(cells))


def _check_sequences(c_seq, a_seq):
    if len(c_seq) != len(a_seq):
        raise PreconditionError("c and A sequences differ in length")
    for i, (c0, c1) in enumerate(zip(c_seq, c_seq[1:])):
        if c1 > c0 or c1 < 0:
            raise PreconditionError(f"c_n must decrease to 0; fails at index {i + 1}", witness=i + 1)
    for i, (a0, a1) in enumerate(zip(a_seq, a_seq[1:])):
        if a1 > a0:
            raise PreconditionError(f"A_n must shrink; fails at index {i + 1}", witness=i + 1)
    if any(not 0 < a <= 1 for a in a_seq):
        raise PreconditionError("A_n = (0, a_n] needs 0 < a_n <= 1")


def _layout_integral(Y, a: float) -> float:
    """int_0^a Y(t) dt in Y's own layout (analytic layouts are already increasing)."""
    if isinstance(Y, SignedVariable) and Y.is_step:
        Y = Y.step
    if isinstance(Y, StepVariable):
        left, total = 0.0, 0.0
        for w, v in Y.cells:
            right = left + float(w)
            total += max(0.0, min(right, a) - left) * float(v)
            left = right
        return total
    return float(lower_integral(Y, a))


def fatou_probe_lemma31(rho: RiskMeasureSpec, X, Y, c_seq, a_seq, tol: float = 1e-6) -> FatouProbeReport:
    """rho along Y_n = (X + c_n) 1_{A_n^c} + Y 1_{A_n} with A_n = (0, a_n].

    Since Y_n >= X, a decreasing rho must satisfy rho(Y_n) <= rho(X); this is
    asserted on every level.
    """
    _check_sequences(c_seq, a_seq)
    decreasing = rho.tag != "custom"
    rho_x = float(rho(X))
    values = []
    if isinstance(X, StepVariable) or (isinstance(X, SignedVariable) and X.is_step):
        Xs = X if isinstance(X, StepVariable) else X.step
        Ys = Y if isinstance(Y, StepVariable) else Y.step
        widths, (xv, yv) = common_refinement(Xs, Ys)
        for i, (x, y) in enumerate(zip(xv, yv)):
            if y < x:
                raise PreconditionError(f"Y < X on refined cell {i}", witness=i)
        for c, a in zip(c_seq, a_seq):
            values.append(float(rho(_build_step_yn(Xs, Ys, Fraction(c), Fraction(a)))))
    else:
        if rho.tag not in ("example21", "mean"):
            raise SpecError("analytic domination probes support the mean and example21 measures")
        grid = np.concatenate([np.logspace(-12, -1, 60), np.linspace(0.1, 0.999, 60)])
        gap_y = np.asarray(Y.value(grid)) - np.asarray(X.value(grid))
        if np.any(gap_y < -1e-12):
            i = int(np.argmin(gap_y))
            raise PreconditionError(f"Y < X at t = {grid[i]:.3g}", witness=float(grid[i]))
        ex = X.mean()
        for c, a in zip(c_seq, a_seq):
            c, a = float(c), float(a)
            e_yn = _layout_integral(Y, a) + ex - float(lower_integral(X, a)) + c * (1.0 - a)
            val = -e_yn
            if rho.tag == "example21" and not Y.is_step:
                # a step Y is bounded on A_n, so only an analytic Y adds a distance term
                tail = Y.neg.restrict_support(min(a, Y.neg.support)) if not Y.neg.is_zero else Y.neg
                val += distance_to_oc_part(tail, rho.norm)
            values.append(val)
    if decreasing:
        for i, v in enumerate(values):
            if v > rho_x + 1e-9 * max(1.0, abs(rho_x)):
                raise ConsistencyError(f"rho(Y_n) = {v} exceeds rho(X) = {rho_x} at level {i}")
    liminf, gap, stable, verdict, changes = _verdict(values, rho_x, tol)
    return FatouProbeReport(rho.name, _describe(X), "lemma31", list(range(1, len(values) + 1)), values,
                            rho_x, liminf, gap, stable, verdict,
                            {"c": [float(c) for c in c_seq], "a": [float(a) for a in a_seq],
                             "last_relative_changes": changes, "tolerance": tol})
