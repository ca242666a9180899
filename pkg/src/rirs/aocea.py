"""Constructive AOCEA checks.

* :func:`aocea_orlicz_certificate` builds, for X in an Orlicz space, disjoint
  tail pieces whose average Z has ||Z|| <= eps, with the Orlicz budget that
  proves it and an independent Luxemburg re-evaluation.
* :func:`verify_appendix_b_chain` checks the two staircase integral bounds in
  exact rational arithmetic.
* :func:`aocea_search_appendix_b` draws convex combinations of equidistributed
  copies of the staircase and measures their distance to the order-continuous
  part under the factorial-window norm (or L1 as a control).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import special

from .analytic import AnalyticRearrangement, DisjointSum, GSpec, integrate_g
from .errors import CapacityError, ConsistencyError, EvaluationError, PreconditionError, SpecError
from .norms import heart_membership, luxemburg_norm
from .orlicz import OrliczFunction

__all__ = [
    "AoceaCertificate",
    "aocea_orlicz_certificate",
    "verify_appendix_b_chain",
    "SearchReport",
    "aocea_search_appendix_b",
    "staircase_copy_distance",
]


# ---------------------------------------------------------------------------
# Orlicz certificate


@dataclass
class AoceaCertificate:
    eps: float
    eta: Optional[float]
    k: int
    indices: list
    tail_integrals: list
    budget: float
    certified_bound: float
    reevaluated_norm: float
    disjoint_mass: float
    trivial: bool = False
    membership: str = ""
    note: str = ""

    def to_json(self) -> dict:
        return {
            "eps": self.eps, "eta": self.eta, "k": self.k,
            "indices": self.indices, "tail_integrals": self.tail_integrals,
            "budget": self.budget, "certified_bound": self.certified_bound,
            "reevaluated_norm": self.reevaluated_norm, "disjoint_mass": self.disjoint_mass,
            "k_eta_eps": None if self.eta is None else self.k * self.eta * self.eps,
            "trivial": self.trivial, "membership": self.membership, "note": self.note,
        }


def _tail_moment(q: AnalyticRearrangement, phi: OrliczFunction, eta: float, n: float) -> float:
    """E[Phi(eta X 1_{X >= n})]."""
    tail = q.restrict_above(n)
    if tail.is_zero:
        return 0.0
    return integrate_g(tail, GSpec.orlicz(phi, 1.0 / eta))


def aocea_orlicz_certificate(q: AnalyticRearrangement, phi: OrliczFunction, eps: float,
                             max_index: int = 10_000) -> AoceaCertificate:
    """Certificate that some average of disjoint tail copies of X has norm <= eps.

    eta = 1/(2 lambda*) makes E[Phi(eta X)] finite; k = ceil(1/(eta eps)); every
    index n_i is the smallest n with k E[Phi(eta X 1_{X >= n})] <= 1, so the
    budget sum stays <= 1. Z = (1/k) sum_i X_i 1_{A_i} with disjoint A_i then
    satisfies E[Phi(Z/eps)] <= budget <= 1.
    """
    if not eps > 0:
        raise SpecError("eps must be positive")
    member = heart_membership(q, phi)
    if member.status == "NotInSpace":
        raise PreconditionError(f"X is not in the Orlicz space ({member})")
    if member.status == "InHeart":
        return AoceaCertificate(eps, None, 1, [], [], 0.0, 0.0, 0.0, 0.0, trivial=True,
                                membership=str(member),
                                note="X lies in the heart, hence in the order-continuous part; k = 1")
    lam_star = member.margin
    eta = 1.0 / (2.0 * lam_star)
    k = math.ceil(1 / (Fraction(eta) * Fraction(repr(eps))))
    n = 1
    while True:
        t = _tail_moment(q, phi, eta, n)
        if k * t <= 1.0:
            break
        n += 1
        if n > max_index:
            raise EvaluationError(f"no index up to {max_index} meets the budget")
    indices = [n] * k
    tails = [t] * k
    budget = float(k * t)
    mass = q.restrict_above(n).support
    disjoint_mass = k * mass
    if disjoint_mass > 1.0:
        raise CapacityError(f"k tail sets need mass {disjoint_mass} > 1")
    piece = q.restrict_above(n).scaled(1.0 / k)
    Z = DisjointSum(tuple([piece] * k))
    reeval = luxemburg_norm(Z, phi)
    if reeval > eps + 1e-9:
        raise ConsistencyError(f"re-evaluated norm {reeval} exceeds eps {eps}")
    return AoceaCertificate(float(eps), eta, k, indices, tails, budget, float(eps), reeval,
                            disjoint_mass, membership=str(member))


# ---------------------------------------------------------------------------
# exact chain


def _c(n: int) -> Fraction:
    return Fraction(1, 2 ** n * math.factorial(n + 1))


def _s(n: int) -> Fraction:
    return Fraction(1, 2 ** n * math.factorial(n))


def _level_mass(n: int) -> Fraction:
    """n! (c_n - c_{n+1})."""
    return math.factorial(n) * (_c(n) - _c(n + 1))


def verify_appendix_b_chain(m_range, extra_terms: int = 40) -> list:
    """Exact check of both staircase bounds for each m.

    lower:  int_0^{c_m} X*  >=  sum_{n=m}^{N} n!(c_n - c_{n+1}) + (N+1)! c_{N+1}  >=  1/((m+1) 2^m)
    upper:  int_0^{s_m} X*  <=  (m-1)!(s_m - c_m) + sum_{n=m}^{N} n!(c_n - c_{n+1}) + 1/((N+2) 2^N)
            and m 2^m times that is <= 3.
    The tail bound uses n!(c_n - c_{n+1}) <= n! c_n = 1/(2^n (n+1)).
    """
    rows = []
    for m in m_range:
        if m < 2:
            raise SpecError("the chain is stated for m >= 2")
        cm, sm = _c(m), _s(m)
        if not (cm < sm <= _c(m - 1)):
            raise ConsistencyError(f"s_{m} does not lie in (c_{m}, c_{m-1}]")
        N = m + extra_terms
        partial = sum((_level_mass(n) for n in range(m, N + 1)), Fraction(0))
        lower_lhs = partial + math.factorial(N + 1) * _c(N + 1)
        lower_rhs = Fraction(1, (m + 1) * 2 ** m)
        if math.factorial(m) * cm != lower_rhs:
            raise ConsistencyError("m! c_m identity failed")
        upper_int = math.factorial(m - 1) * (sm - cm) + partial + Fraction(1, (N + 2) * 2 ** N)
        upper_scaled = m * 2 ** m * upper_int
        lower_ok = lower_lhs >= lower_rhs
        upper_ok = upper_scaled <= 3
        rows.append({
            "m": m,
            "lower_lhs": float(lower_lhs), "lower_rhs": float(lower_rhs), "lower_holds": lower_ok,
            "upper_scaled": float(upper_scaled), "upper_bound": 3, "upper_holds": upper_ok,
            "terms": N - m + 1,
        })
        if not (lower_ok and upper_ok):
            raise ConsistencyError(f"staircase inequality violated at m = {m}: {rows[-1]}")
    return rows


# ---------------------------------------------------------------------------
# separation search

_HEAD_TOP = 7  # levels >= 7 travel as one tail block of width c_7
_SLOT = Fraction(1, 2 ** 7 * math.factorial(8))  # c_7
_K = 100  # tail levels expanded explicitly per group
_LN2 = math.log(2.0)


def _slot_units(x: Fraction) -> int:
    q = x / _SLOT
    if q.denominator != 1:
        raise SpecError("piece width is not a multiple of the slot width")
    return int(q)


def _level_tables():
    lv = np.arange(_HEAD_TOP, _K + 1)
    logc = -(lv * _LN2 + special.gammaln(lv + 2.0))
    c = np.exp(logc)
    widths = c * (1.0 - 1.0 / (2.0 * (lv + 2)))
    fact = np.exp(special.gammaln(lv + 1.0))
    deep = sum((1.0 - 1.0 / (2.0 * (n + 2))) / ((n + 1.0) * 2.0 ** n) for n in range(_K + 1, _K + 200))
    c_deep = float(np.exp(-((_K + 1) * _LN2 + special.gammaln(_K + 3.0))))
    return widths, fact, deep, c_deep


_WIDTHS, _FACT, _DEEP_INT, _DEEP_MASS = _level_tables()
_S_N = np.exp(-(np.arange(1, 61) * _LN2 + special.gammaln(np.arange(1, 61) + 1.0)))
_N_2N = np.arange(1, 61) * 2.0 ** np.arange(1, 61)


def _head_pieces():
    """(kind, width in slots, value) for the head levels 1..6, the zero piece and the tail block."""
    pieces = []
    for n in range(1, _HEAD_TOP):
        w = _c(n) - _c(n + 1)
        pieces.append(("level", _slot_units(w), float(math.factorial(n))))
    pieces.append(("zero", _slot_units(Fraction(3, 4)), 0.0))
    pieces.append(("tail", 1, None))
    return pieces


_PIECES = _head_pieces()
_TOTAL_SLOTS = sum(p[1] for p in _PIECES)
assert _TOTAL_SLOTS * _SLOT == 1


def _random_copy(rng, split_zero: bool):
    """Layout of one equidistributed copy: list of (start slot, length, value or None for tail)."""
    pieces = [p for p in _PIECES if p[0] != "zero"]
    zero_len = _PIECES[_HEAD_TOP - 1][1]
    if split_zero:
        cut = int(rng.integers(1, zero_len))
        pieces += [("zero", cut, 0.0), ("zero", zero_len - cut, 0.0)]
    else:
        pieces.append(("zero", zero_len, 0.0))
    order = rng.permutation(len(pieces))
    out, pos = [], 0
    for i in order:
        kind, length, val = pieces[int(i)]
        out.append((pos, length, val))
        pos += length
    return out


@dataclass
class _Mixture:
    const_vals: np.ndarray  # values of constant pieces (slot-aligned)
    const_w: np.ndarray  # widths (probability)
    groups: list  # (Lambda, C) per tail slot


def _mixture(copies, weights) -> _Mixture:
    cuts = sorted({0, _TOTAL_SLOTS} | {s for cp in copies for s, _, _ in cp} |
                  {s + l for cp in copies for s, l, _ in cp})
    cuts = np.array(cuts, dtype=np.int64)
    lo, hi = cuts[:-1], cuts[1:]
    const = np.zeros(len(lo))
    lam = np.zeros(len(lo))
    for cp, w in zip(copies, weights):
        starts = np.array([s for s, _, _ in cp])
        idx = np.searchsorted(starts, lo, side="right") - 1
        for j, (s, l, v) in enumerate(cp):
            mask = idx == j
            if v is None:
                lam[mask] += w
            else:
                const[mask] += w * v
    tail_mask = lam > 0
    if np.any(hi[tail_mask] - lo[tail_mask] != 1):
        raise ConsistencyError("tail block not confined to one slot")
    slot = float(_SLOT)
    keep = ~tail_mask
    groups = [(float(l), float(c)) for l, c in zip(lam[tail_mask], const[tail_mask])]
    return _Mixture(const[keep], (hi[keep] - lo[keep]).astype(float) * slot, groups)


def _sorted_profile(mix: _Mixture):
    """Explicit pieces sorted by value (descending) plus the deep-tail mass and integral."""
    vals = [mix.const_vals]
    widths = [mix.const_w]
    for lam, c in mix.groups:
        vals.append(lam * _FACT + c)
        widths.append(_WIDTHS)
    v = np.concatenate(vals)
    w = np.concatenate(widths)
    order = np.argsort(-v, kind="stable")
    v, w = v[order], w[order]
    deep_mass = len(mix.groups) * _DEEP_MASS
    deep_min = min((lam * math.exp(special.gammaln(_K + 2.0)) + c for lam, c in mix.groups), default=math.inf)
    if mix.groups and not deep_min > v[0]:
        raise CapacityError(f"deep tail ({deep_min:.3g}) does not dominate explicit pieces ({v[0]:.3g})")
    deep_int = sum(lam * _DEEP_INT + c * _DEEP_MASS for lam, c in mix.groups)
    return v, w, deep_mass, deep_int, deep_min


def _tau_table(v, w, deep_mass, deep_int, rs):
    """tau_n((Y - r)^+) for n = 1..60 and each r (rows: r), all rungs at once."""
    cw = np.concatenate([[0.0], np.cumsum(w)]) + deep_mass  # mass of the top j explicit pieces + deep tail
    ci = np.concatenate([[0.0], np.cumsum(v * w)]) + deep_int
    rs = np.asarray(rs, dtype=float)
    # v is sorted descending, so {v > r} is a prefix
    n_above = np.searchsorted(-v, -rs, side="left")
    mass_r = cw[n_above]
    s = np.minimum(_S_N[None, :], mass_r[:, None])
    if np.any(s < deep_mass):
        raise CapacityError("a norm window falls inside the deep tail")
    j = np.clip(np.searchsorted(cw, s, side="right") - 1, 0, len(v) - 1)
    top = ci[j] + np.maximum(s - cw[j], 0.0) * v[j]
    J = top - rs[:, None] * s
    return _N_2N[None, :] * np.maximum(J, 0.0)


def _l1_excess(v, w, deep_mass, deep_int, r):
    above = v > r
    return float(deep_int - r * deep_mass + np.sum((v[above] - r) * w[above]))


def staircase_copy_distance(copies, weights, norm: str = "appendix_b", max_rungs: int = 60) -> dict:
    """d(Y, order-continuous part) for Y = sum_j weights_j * copy_j.

    Window norm: each rung value is max(max_{n<=60} tau_n, 2 sum Lambda + max Lambda),
    the second term being the limit of tau_n from the tail groups, which the
    group bound also caps for n > 60 up to C^+ (n/n!).
    """
    mix = _mixture(copies, weights)
    v, w, deep_mass, deep_int, deep_min = _sorted_profile(mix)
    lam_sum = sum(l for l, _ in mix.groups)
    lam_max = max((l for l, _ in mix.groups), default=0.0)
    limit = 2.0 * lam_sum + lam_max
    cum = np.cumsum(w[::-1])[::-1]  # mass at or below each value, descending order
    # median: value where the cumulative mass from the bottom reaches 1/2
    asc_v, asc_w = v[::-1], w[::-1]
    k = int(np.searchsorted(np.cumsum(asc_w), 0.5))
    r0 = float(asc_v[min(k, len(asc_v) - 1)])
    if r0 <= 0:
        r0 = 1.0
    rs = r0 * 2.0 ** np.arange(max_rungs)
    rs = rs[rs < 0.5 * deep_min]
    if norm == "appendix_b":
        taus = _tau_table(v, w, deep_mass, deep_int, rs)
        c_pos = max((max(c, 0.0) for _, c in mix.groups), default=0.0)
        band = c_pos * 61 * math.exp(-special.gammaln(62.0))
        values = np.maximum(taus.max(axis=1), limit)
    elif norm == "lp:1":
        values = np.array([_l1_excess(v, w, deep_mass, deep_int, r) for r in rs])
        band = 0.0
    else:
        raise SpecError(f"search norm must be appendix_b or lp:1, got {norm!r}")
    for i, (a, b) in enumerate(zip(values, values[1:])):
        if b > a + 1e-9 * max(1.0, a):
            raise ConsistencyError(f"ladder increased at rung {i + 1}: {a} -> {b}")
    return {"distance": float(values.min()), "limit": limit if norm == "appendix_b" else 0.0,
            "rungs": len(rs), "band": band, "groups": len(mix.groups)}


@dataclass
class SearchReport:
    norm: str
    trials: int
    seed: int
    n_head: int
    max_copies: int
    min_distance: float
    argmin_trial: int
    mean_distance: float
    bound: float
    holds: bool
    distances_by_copies: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "norm": self.norm, "trials": self.trials, "seed": self.seed, "n_head": self.n_head,
            "max_copies": self.max_copies, "min_distance": self.min_distance,
            "argmin_trial": self.argmin_trial, "mean_distance": self.mean_distance,
            "bound": self.bound, "holds": self.holds, "distances_by_copies": self.distances_by_copies,
        }


def _trial(seed: int, t: int, max_copies: int, norm: str):
    rng = np.random.default_rng([seed, t])
    m = int(rng.integers(1, max_copies + 1))
    copies = [_random_copy(rng, split_zero=bool(rng.integers(0, 2))) for _ in range(m)]
    raw = rng.uniform(0.05, 1.0, size=m)
    weights = raw / raw.sum()
    try:
        res = staircase_copy_distance(copies, weights, norm)
    except CapacityError as exc:
        raise CapacityError(f"trial {t}: {exc}") from exc
    return m, res["distance"]


def aocea_search_appendix_b(n_head: int = 6, copies: int = 6, trials: int = 10_000, seed: int = 0,
                            norm: str = "appendix_b", threads: Optional[int] = None) -> SearchReport:
    """Random convex combinations of staircase copies and their distance to X_a.

    Each copy permutes the head pieces (levels 1..n_head and the zero piece,
    optionally split in two) and moves the tail block (levels > n_head) as one
    order-preserving unit. n_head is fixed at 6 by the slot grid.
    """
    if n_head != _HEAD_TOP - 1:
        raise SpecError(f"the slot grid supports n_head = {_HEAD_TOP - 1} only")
    if copies < 1:
        raise SpecError("need at least one copy")
    if threads is None:
        threads = int(os.environ.get("RIRS_THREADS") or os.cpu_count() or 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda t: _trial(seed, t, copies, norm), range(trials)))
    else:
        results = [_trial(seed, t, copies, norm) for t in range(trials)]
    dists = np.array([d for _, d in results])
    by_m = {}
    for m, d in results:
        cur = by_m.get(m)
        by_m[m] = d if cur is None else min(cur, d)
    i = int(np.argmin(dists))
    bound = 0.25 - 1e-9 if norm == "appendix_b" else 0.01
    holds = bool(dists.min() >= bound) if norm == "appendix_b" else bool(dists.min() <= bound)
    return SearchReport(norm, trials, seed, n_head, copies, float(dists.min()), i, float(dists.mean()),
                        bound, holds, {str(k): float(v) for k, v in sorted(by_m.items())})
