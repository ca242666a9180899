"""Fenchel conjugates and dual gaps on step variables.

Pairing: rho*(Y) = sup_X (E[XY] - rho(X)) and rho**(X) = sup_Y (E[XY] - rho*(Y)).
For positively homogeneous rho the conjugate is 0 on the dual set D and +inf
off it, so rho**(X) = sup_{Y in D} E[XY]. A zero gap rho - rho** is the
computable consequence of lower semicontinuity that this module checks; it
says nothing about analytic (unbounded) inputs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import ConsistencyError, SpecError, StructureError
from .measure import StepVariable, common_refinement, signed_decreasing_rearrangement
from .risk import RiskMeasureSpec, _as_step

__all__ = [
    "ConjugateResult",
    "conjugate",
    "DualGapReport",
    "biconjugate",
    "dual_gap_sweep",
    "proper_witness",
    "SURROGATE_NOTE",
]

SURROGATE_NOTE = ("zero dual gap on step variables is the checkable surrogate for weak* lower "
                  "semicontinuity; unbounded inputs carry no finite dual certificate here")

MAX_SIGN_CELLS = 9
MAX_VERTEX_CELLS = 8
_FLOAT_SLACK = 1e-12  # relative slack used only when rho itself is a float


def _pair(X: StepVariable, Y: StepVariable):
    widths, (a, b) = common_refinement(X, Y)
    return sum(w * x * y for w, x, y in zip(widths, a, b))


def _on_grid(widths, values) -> StepVariable:
    return StepVariable(tuple(zip(widths, values)))


@dataclass
class ConjugateResult:
    value: object  # 0, +inf, or a lower bound
    feasible: bool
    lower_bound: bool
    probes: int
    witness: Optional[dict] = None

    def to_json(self) -> dict:
        v = self.value
        return {"value": "inf" if v == math.inf else float(v), "feasible": self.feasible,
                "lower_bound": self.lower_bound, "probes": self.probes, "witness": self.witness}


def _probe_family(widths, seed, n_random):
    n = len(widths)
    exact = []
    if n <= MAX_SIGN_CELLS:
        for signs in itertools.product((-1, 0, 1), repeat=n):
            if any(signs):
                exact.append(_on_grid(widths, [Fraction(s) for s in signs]))
    else:
        for i in range(n):
            for s in (-1, 1):
                exact.append(_on_grid(widths, [Fraction(s if j == i else 0) for j in range(n)]))
    for c in (-1, 1):
        exact.append(StepVariable.constant(Fraction(c)))
    rng = np.random.default_rng(seed)
    rand = [_on_grid(widths, [Fraction(int(k), 4) for k in rng.integers(-8, 9, size=n)])
            for _ in range(n_random)]
    return exact + rand


def conjugate(rho: RiskMeasureSpec, Y: StepVariable, seed: int = 0, n_random: int = 32) -> ConjugateResult:
    """rho*(Y) by probing directions on Y's grid.

    Sign patterns {-1,0,1}^n (up to MAX_SIGN_CELLS cells) and the constants
    +-1 contain the indicators -1_S and 1_i that cut out the dual sets of the
    catalog measures, so for those the 0/+inf classification is complete.
    Non-homogeneous measures get sup over probes and scalings, flagged as a
    lower bound.
    """
    probes = _probe_family(Y.widths, seed, n_random)
    best, best_x = None, None
    scales = (Fraction(1),) if rho.positively_homogeneous else tuple(Fraction(2) ** k for k in range(-3, 5))
    for X0 in probes:
        for t in scales:
            Xt = X0.scale(t) if t != 1 else X0
            val = _pair(Xt, Y) - rho(Xt)
            if best is None or val > best:
                best, best_x = val, Xt
    if rho.positively_homogeneous:
        tol = 0 if isinstance(best, Fraction) else _FLOAT_SLACK
        if best > tol:
            return ConjugateResult(math.inf, False, False, len(probes),
                                   {"X": best_x.to_json(), "pairing_minus_rho": float(best)})
        return ConjugateResult(0, True, False, len(probes))
    return ConjugateResult(max(best, 0), True, True, len(probes) * len(scales),
                           {"X": best_x.to_json(), "value": float(best)})


# ---------------------------------------------------------------------------


@dataclass
class DualGapReport:
    measure: str
    X: StepVariable
    rho: object
    rho_bb: object
    gap: float
    Y_star: StepVariable
    method: str
    lower_bound: bool = False
    note: str = SURROGATE_NOTE
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "measure": self.measure, "X": self.X.to_json(), "rho": float(self.rho),
            "rho_bb": float(self.rho_bb), "gap": self.gap, "Y_star": self.Y_star.to_json(),
            "method": self.method, "lower_bound": self.lower_bound, "note": self.note,
            "details": self.details,
        }


def _weak_duality(rho_x, rho_bb):
    if isinstance(rho_x, Fraction) and isinstance(rho_bb, Fraction):
        return rho_bb <= rho_x
    return float(rho_bb) <= float(rho_x) + _FLOAT_SLACK * max(1.0, abs(float(rho_x)))


def _es_closed(X: StepVariable, alpha: Fraction):
    """Q = 1/alpha on the lowest alpha mass of X (ties broken by cell order)."""
    cap = 1 / alpha
    order = sorted(range(len(X)), key=lambda i: X.cells[i][1])
    left = Fraction(1)
    Q = [Fraction(0)] * len(X)
    for i in order:
        w = X.cells[i][0]
        if left <= 0:
            break
        take = min(w * cap, left)
        Q[i] = take / w
        left -= take
    return Q


def _es_vertices(X: StepVariable, alpha: Fraction):
    """Every vertex of {0 <= Q <= 1/alpha, E[Q] = 1} on X's grid."""
    cap = 1 / alpha
    p = X.widths
    n = len(p)
    for j in range(n):
        others = [i for i in range(n) if i != j]
        for bits in itertools.product((0, 1), repeat=n - 1):
            Q = [Fraction(0)] * n
            used = Fraction(0)
            for i, b in zip(others, bits):
                if b:
                    Q[i] = cap
                    used += p[i] * cap
            q = (1 - used) / p[j]
            if 0 <= q <= cap:
                Q[j] = q
                yield Q


def _capped_projection(z, p, cap):
    """Euclidean projection of each row of z onto {0 <= Q <= cap, sum p Q = 1}."""
    # f(mu) = sum p clip(z - mu p, 0, cap) is piecewise linear and non-increasing;
    # evaluate it at every kink and interpolate inside the bracketing piece
    kinks = np.sort(np.concatenate([z / p, (z - cap) / p], axis=1), axis=1)
    f = (p * np.clip(z[:, None, :] - kinks[:, :, None] * p, 0, cap)).sum(axis=2)
    j = (f > 1.0).sum(axis=1)  # f is non-increasing along the sorted kinks
    rows = np.arange(len(z))
    jl = np.clip(j - 1, 0, kinks.shape[1] - 1)
    jr = np.clip(j, 0, kinks.shape[1] - 1)
    f0, f1 = f[rows, jl], f[rows, jr]
    k0, k1 = kinks[rows, jl], kinks[rows, jr]
    den = np.where(f0 - f1 > 0, f0 - f1, 1.0)
    mu = np.where(jl == jr, k0, k0 + (f0 - 1.0) / den * (k1 - k0))
    return np.clip(z - mu[:, None] * p, 0, cap)


def _repair(Q, X: StepVariable, cap: Fraction):
    """Exact rational point of the ES dual set near the float iterate Q."""
    p = X.widths
    Qf = [min(max(Fraction(float(q)).limit_denominator(10 ** 9), Fraction(0)), cap) for q in Q]
    d = 1 - sum(w * q for w, q in zip(p, Qf))
    if d > 0:
        for i in sorted(range(len(p)), key=lambda i: X.cells[i][1]):
            add = min(cap - Qf[i], d / p[i])
            Qf[i] += add
            d -= add * p[i]
            if d == 0:
                break
    elif d < 0:
        for i in sorted(range(len(p)), key=lambda i: X.cells[i][1], reverse=True):
            cut = min(Qf[i], -d / p[i])
            Qf[i] -= cut
            d += cut * p[i]
            if d == 0:
                break
    if d != 0 or sum(w * q for w, q in zip(p, Qf)) != 1:
        raise ConsistencyError("dual repair failed")
    return Qf


def _es_ascent(X: StepVariable, alpha: Fraction, seed: int, iters: int = 1000, restarts: int = 8):
    """Projected supergradient ascent, all restarts advanced together; best iterate kept."""
    cap = float(1 / alpha)
    p = np.array([float(w) for w in X.widths])
    x = np.array([float(v) for v in X.values])
    grad = -p * x
    # drop the component normal to sum p Q = 1; it only moves Q off the constraint
    tangent = grad - (grad @ p) / (p @ p) * p
    step_dir = tangent / (np.linalg.norm(tangent) or 1.0)
    rng = np.random.default_rng(seed)
    Q = _capped_projection(rng.dirichlet(np.ones(len(p)), size=restarts) / p, p, cap)
    vals = Q @ grad
    i = int(np.argmax(vals))
    best_q, best_v = Q[i].copy(), vals[i]
    for k in range(1, iters + 1):
        Q = _capped_projection(Q + step_dir / math.sqrt(k), p, cap)
        vals = Q @ grad
        i = int(np.argmax(vals))
        if vals[i] > best_v:
            best_q, best_v = Q[i].copy(), vals[i]
    return _repair(best_q, X, 1 / alpha)


def _uniform_grid(*variables):
    bps = set()
    for V in variables:
        bps.update(V.breakpoints())
    N = math.lcm(*[Fraction(b).denominator for b in bps])
    return N


def _supphi_dual(X: StepVariable, w: StepVariable, vertex: bool):
    """Y = -(1 + w') over rearrangements w' of w; returns (value, Y)."""
    if not vertex:
        # comonotone pairing of w with -X
        neg = -X
        widths, (a, b) = common_refinement(X, w)
        order_x = sorted(range(len(widths)), key=lambda i: -neg.refine_to(
            tuple(itertools.accumulate(widths, initial=Fraction(0)))).cells[i][1])
        # lay the decreasing rearrangement of w onto cells in decreasing order of -X
        wdec = signed_decreasing_rearrangement(w)
        from .measure import _fill

        filled, done = _fill([widths[i] for i in order_x], list(wdec.cells))
        cells = [None] * len(widths)
        for i, sub in zip(order_x, filled):
            cells[i] = sub
        Xr = [(ww, xv) for ww, xv in zip(widths, a)]
        outY, outX = [], []
        for (ww, xv), sub in zip(Xr, cells):
            for sw, sv in sub:
                outY.append((sw, -(1 + sv)))
                outX.append((sw, xv))
        Y = StepVariable(tuple(outY))
        return _pair(X, Y), Y
    N = _uniform_grid(X, w)
    if N > MAX_VERTEX_CELLS:
        raise StructureError(f"unsupported instance: common uniform grid has {N} > {MAX_VERTEX_CELLS} cells")
    bps = tuple(Fraction(i, N) for i in range(N + 1))
    xs = X.refine_to(bps).values
    ws = w.refine_to(bps).values
    best, best_perm = None, None
    for perm in itertools.permutations(range(N)):
        val = -sum(xs[i] * (1 + ws[perm[i]]) for i in range(N)) * Fraction(1, N)
        if best is None or val > best:
            best, best_perm = val, perm
    Y = StepVariable(tuple((Fraction(1, N), -(1 + ws[best_perm[i]])) for i in range(N)))
    return best, Y


def _distortion_vertex(X: StepVariable, g):
    p = X.widths
    n = len(p)
    if n > MAX_VERTEX_CELLS:
        raise StructureError(f"unsupported instance: {n} > {MAX_VERTEX_CELLS} cells")
    best, best_Q = None, None
    for perm in itertools.permutations(range(n)):
        F = Fraction(0) if isinstance(p[0], Fraction) else 0.0
        prev = g(F)
        Q = [0] * n
        val = 0
        for i in perm:
            F = F + p[i]
            cur = g(F)
            Q[i] = (cur - prev) / p[i]
            val -= X.cells[i][1] * (cur - prev)
            prev = cur
        if best is None or val > best:
            best, best_Q = val, Q
    return best, best_Q


def _distortion_closed(X: StepVariable, g):
    order = sorted(range(len(X)), key=lambda i: X.cells[i][1])
    p = X.widths
    Q = [0] * len(X)
    F = Fraction(0)
    prev = g(F)
    val = 0
    for i in order:
        F += p[i]
        cur = g(F)
        Q[i] = (cur - prev) / p[i]
        val -= X.cells[i][1] * (cur - prev)
        prev = cur
    return val, Q


def biconjugate(rho: RiskMeasureSpec, X: StepVariable, method: str = "auto", seed: int = 0) -> DualGapReport:
    """rho**(X) over the measure's dual set; method in {auto, closed, vertex, ascent}."""
    X = _as_step(X)
    if method not in ("auto", "closed", "vertex", "ascent"):
        raise SpecError(f"unknown dual method {method!r}")
    tag = rho.tag
    if tag == "custom":
        raise StructureError(f"unsupported instance: {rho.name} has no dual description")
    rho_x = rho(X)
    m = method
    if m == "auto":
        m = "closed"
    details = {}
    if tag in ("mean", "example21"):
        Y = StepVariable.constant(Fraction(-1))
        rho_bb = _pair(X, Y)
        used = "closed-form-dual"
        if tag == "example21":
            details["reduction"] = "bounded inputs: example21 coincides with the mean"
    elif tag == "es":
        a = rho.alpha
        if m == "closed":
            Q = _es_closed(X, a)
            used = "closed-form-dual"
        elif m == "vertex":
            if len(X) > MAX_VERTEX_CELLS:
                raise StructureError(f"unsupported instance: {len(X)} > {MAX_VERTEX_CELLS} cells")
            best, Q = None, None
            count = 0
            for cand in _es_vertices(X, a):
                count += 1
                v = -sum(w * q * x for (w, x), q in zip(X.cells, cand))
                if best is None or v > best:
                    best, Q = v, cand
            details["vertices"] = count
            used = "vertex-enumeration"
        else:
            Q = _es_ascent(X, a, seed)
            used = "ascent"
        Y = _on_grid(X.widths, [-q for q in Q])
        rho_bb = _pair(X, Y)
    elif tag == "distortion":
        if m == "ascent":
            raise StructureError("ascent is implemented for expected shortfall only")
        g = rho.distortion
        if m == "vertex":
            rho_bb, Q = _distortion_vertex(X, g)
            used = "vertex-enumeration"
        else:
            rho_bb, Q = _distortion_closed(X, g)
            used = "closed-form-dual"
        Y = _on_grid(X.widths, [-q for q in Q])
    elif tag == "supphi":
        if m == "ascent":
            raise StructureError("ascent is implemented for expected shortfall only")
        rho_bb, Y = _supphi_dual(X, rho.weights, vertex=(m == "vertex"))
        used = "vertex-enumeration" if m == "vertex" else "closed-form-dual"
    else:
        raise StructureError(f"unsupported instance: {rho.name}")
    if not _weak_duality(rho_x, rho_bb):
        raise ConsistencyError(f"weak duality violated: rho** = {rho_bb} > rho = {rho_x}")
    gap = float(rho_x - rho_bb) if not isinstance(rho_x - rho_bb, Fraction) else float(rho_x - rho_bb)
    return DualGapReport(rho.name, X, rho_x, rho_bb, gap, Y, used, lower_bound=(used == "ascent"),
                         details=details)


def dual_gap_sweep(rho: RiskMeasureSpec, Xs, method: str = "auto", seed: int = 0) -> dict:
    rows = []
    for i, X in enumerate(Xs):
        r = biconjugate(rho, X, method, seed=seed + i)
        rows.append({"index": i, "cells": len(r.X), "rho": float(r.rho), "rho_bb": float(r.rho_bb),
                     "gap": r.gap, "method": r.method})
    gaps = [r["gap"] for r in rows]
    return {"measure": rho.name, "method": method, "rows": rows,
            "max_gap": max(gaps) if gaps else 0.0, "note": SURROGATE_NOTE}


def proper_witness(rho: RiskMeasureSpec, seed: int = 0):
    """A Y with rho*(Y) < inf, confirmed by :func:`conjugate`."""
    if rho.tag == "supphi":
        Y = rho.weights.map(lambda v: -(1 + v))
    elif rho.tag == "custom":
        raise StructureError(f"no dual description for {rho.name}")
    else:
        Y = StepVariable.constant(Fraction(-1))
    res = conjugate(rho, Y, seed=seed)
    if res.value == math.inf:
        raise ConsistencyError(f"candidate witness has infinite conjugate for {rho.name}")
    return Y, res
