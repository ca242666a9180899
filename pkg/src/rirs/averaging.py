"""Averages of block-wise equidistributed copies on finite partitions.

Everything here is exact: widths are Fractions and values keep their type, so
equidistribution and conditional-mean identities are checked with ``==``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import StructureError
from .measure import (
    Partition,
    StepVariable,
    _fill,
    common_refinement,
    conditional_expectation,
    lift_partition,
)
from .norms import NormSpec, l1_constant

__all__ = [
    "BlockwiseAverage",
    "blockwise_equidistributed_average",
    "SwapAverageReport",
    "paired_swap_average",
    "weighted_average",
]

MAX_ENUMERATION = 5040


def weighted_average(variables, weights) -> StepVariable:
    """sum_i w_i X_i on the common refinement."""
    widths, cols = common_refinement(*variables)
    vals = []
    for j in range(len(widths)):
        vals.append(sum(w * col[j] for w, col in zip(weights, cols)))
    return StepVariable(tuple(zip(widths, vals)))


def _restrict_law(X: StepVariable, cells) -> tuple:
    acc: dict = {}
    for i in cells:
        w, v = X.cells[i]
        acc[v] = acc.get(v, Fraction(0)) + w
    return tuple(sorted(acc.items(), key=lambda kv: kv[0]))


def _block_means(X: StepVariable, pi: Partition) -> list:
    return [sum(X.cells[i][0] * X.cells[i][1] for i in b) / m for b, m in zip(pi.blocks, pi.masses)]


def _relayout(X: StepVariable, pi: Partition, orders) -> StepVariable:
    """Within each block, lay the block's cells out in the given order over the block's own cells."""
    out = [None] * len(X)
    for b, order in zip(pi.blocks, orders):
        pieces = [X.cells[b[k]] for k in order]
        filled, done = _fill([X.cells[i][0] for i in b], pieces)
        if not done:
            raise StructureError("block contents did not fit the block")
        for i, sub in zip(b, filled):
            out[i] = sub
    cells = []
    for sub in out:
        for w, v in sub:
            if v is None:
                raise StructureError("block layout left a gap")
            cells.append((w, v))
    return StepVariable(tuple(cells))


@dataclass
class BlockwiseAverage:
    X_prime: StepVariable
    V: StepVariable
    copies: list
    weights: list
    block_laws_equal: bool
    conditional_mean_equal: bool
    distance: float = 0.0
    eps: float = 0.0
    mode: str = "enumerate"

    def to_json(self) -> dict:
        return {
            "X_prime": self.X_prime.to_json(), "n_copies": len(self.copies),
            "weights": [str(w) for w in self.weights],
            "block_laws_equal": self.block_laws_equal,
            "conditional_mean_equal": self.conditional_mean_equal,
            "distance": self.distance, "eps": self.eps, "mode": self.mode,
            "note": "step inputs are bounded, so V = X' lies in the order-continuous part",
        }


def blockwise_equidistributed_average(X: StepVariable, pi: Partition, eps: float = 0.0,
                                      norm: Optional[NormSpec] = None, seed=None,
                                      n_copies: int = 8) -> BlockwiseAverage:
    """X' = sum lambda_i X_i with each X_i equidistributed with X on every block.

    Copies permute the cells inside each block. All copies are used (uniform
    weights) when there are at most MAX_ENUMERATION of them and no seed is
    given; otherwise ``n_copies`` seeded copies with random rational weights.
    """
    pi.check_compatible(X)
    total = math.prod(math.factorial(len(b)) for b in pi.blocks)
    if seed is None and total <= MAX_ENUMERATION:
        mode = "enumerate"
        orders = list(itertools.product(*[itertools.permutations(range(len(b))) for b in pi.blocks]))
        weights = [Fraction(1, len(orders))] * len(orders)
    else:
        mode = "seeded"
        rng = np.random.default_rng(seed)
        orders = [[tuple(int(k) for k in rng.permutation(len(b))) for b in pi.blocks] for _ in range(n_copies)]
        raw = [Fraction(int(rng.integers(1, 10))) for _ in orders]
        weights = [r / sum(raw) for r in raw]
    copies = [_relayout(X, pi, o) for o in orders]

    law_ok = True
    target = [_restrict_law(X, b) for b in pi.blocks]
    for Xi in copies:
        fine = lift_partition(pi, X, Xi)
        if [_restrict_law(Xi, b) for b in fine.blocks] != target:
            law_ok = False
    Xp = weighted_average(copies, weights)
    fine = lift_partition(pi, X, Xp)
    mean_ok = _block_means(Xp, fine) == _block_means(X, pi)
    dist = 0.0
    if norm is not None:
        dist = float(norm.evaluate(Xp - Xp))
    return BlockwiseAverage(Xp, Xp, copies, weights, law_ok, mean_ok, dist, float(eps), mode)


# ---------------------------------------------------------------------------


@dataclass
class SwapAverageReport:
    pairs: int
    checks: dict
    lhs_norm: float
    rhs_bound: float
    constant: float
    distance_xv: float
    average: Optional[StepVariable] = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v for v in self.checks.values() if v is not None)

    def to_json(self) -> dict:
        return {
            "pairs": self.pairs, "checks": self.checks, "passed": self.passed,
            "lhs_norm": self.lhs_norm, "rhs_bound": self.rhs_bound, "constant": self.constant,
            "distance_xv": self.distance_xv, "details": self.details,
        }


def _refine(X: StepVariable, widths) -> StepVariable:
    return X.refine_to(tuple(itertools.accumulate(widths, initial=Fraction(0))))


def _transplant(paired, subs, perm_per_block):
    """Move the content of sub-block j to sub-block perm(j), per block; paired cells stay paired."""
    n = len(paired)
    out = [None] * n
    for subblocks, perm in zip(subs, perm_per_block):
        for j, src in enumerate(subblocks):
            dst = subblocks[perm[j]]
            pieces = [paired[i] for i in src]
            filled, done = _fill([paired[i][0] for i in dst], pieces)
            if not done or any(v is None for sub in filled for _, v in sub):
                raise StructureError("sub-blocks of one block must have equal mass")
            for i, sub in zip(dst, filled):
                out[i] = sub
    cells = [c for sub in out for c in sub]
    X = StepVariable(tuple((w, xv) for w, (xv, _) in cells))
    V = StepVariable(tuple((w, vv) for w, (_, vv) in cells))
    return X, V


def paired_swap_average(X: StepVariable, V: StepVariable, pi: Partition, sub_blocks,
                        X_prime: Optional[StepVariable] = None, norm: Optional[NormSpec] = None,
                        seed=None, samples: int = 64) -> SwapAverageReport:
    """Average of (X'_{(tau,sigma)}, V_{(tau,sigma)}) over sub-block permutations.

    ``sub_blocks[k]`` splits block k of ``pi`` (cell indices of X) into
    equal-mass sub-blocks on which V is constant. X' defaults to X and must
    satisfy E[X'|pi] = E[X|pi]. Checks:
      (i)   each X'_{(tau,sigma)} ~ X'
      (ii)  X'_{(tau,sigma)} - V_{(tau,sigma)} ~ X' - V
      (iii) the average of V_{(tau,sigma)} equals E[V|pi]
      (iv)  ||avg X'_{(tau,sigma)} - E[X|pi]|| <= (C+1) ||X' - V||
    with C = (sum_b 1/P(b)) ||1|| C_L1 bounding the conditional expectation.
    """
    norm = norm or NormSpec.lp(1)
    pi.check_compatible(X)
    Xp = X if X_prime is None else X_prime
    if len(sub_blocks) != len(pi.blocks):
        raise StructureError("one sub-block list per block required")
    for k, (b, subs) in enumerate(zip(pi.blocks, sub_blocks)):
        flat = sorted(i for s in subs for i in s)
        if flat != list(b):
            raise StructureError(f"sub-blocks of block {k} do not tile it")
        masses = {sum((X.cells[i][0] for i in s), Fraction(0)) for s in subs}
        if len(masses) != 1:
            raise StructureError(f"sub-blocks of block {k} have unequal masses {sorted(masses)}")
    # common grid for X, X', V
    widths, _ = common_refinement(X, Xp, V)
    fine_X = _refine(X, widths)
    Xr, Vr = _refine(Xp, widths), _refine(V, widths)
    flat_subs = [s for subs in sub_blocks for s in subs]
    sub_pi = lift_partition(Partition.from_blocks(X, flat_subs), X, fine_X)
    fine_pi = lift_partition(pi, X, fine_X)
    it = iter(sub_pi.blocks)
    fine_subs = [[next(it) for _ in subs] for subs in sub_blocks]
    for subs in fine_subs:
        for s in subs:
            if len({Vr.cells[i][1] for i in s}) != 1:
                raise StructureError("V must be constant on every sub-block")
    if _block_means(Xr, fine_pi) != _block_means(fine_X, fine_pi):
        raise StructureError("E[X'|pi] differs from E[X|pi]")

    paired = [(w, (x, v)) for (w, x), (_, v) in zip(Xr.cells, Vr.cells)]
    total = math.prod(math.factorial(len(s)) for s in fine_subs)
    enumerated = seed is None and total <= MAX_ENUMERATION
    if enumerated:
        perms = list(itertools.product(*[itertools.permutations(range(len(s))) for s in fine_subs]))
    else:
        rng = np.random.default_rng(seed)
        perms = [[tuple(int(k) for k in rng.permutation(len(s))) for s in fine_subs] for _ in range(samples)]
    xs, vs = [], []
    for p in perms:
        a, b = _transplant(paired, fine_subs, p)
        xs.append(a)
        vs.append(b)

    diff_law = (Xr - Vr).aggregate()
    check_i = all(x.equidistributed(Xr) for x in xs)
    check_ii = all((x - v).aggregate() == diff_law for x, v in zip(xs, vs))
    w = [Fraction(1, len(perms))] * len(perms)
    v_avg = weighted_average(vs, w)
    cond_v = conditional_expectation(Vr, fine_pi)
    # the V-average identity needs every permutation; sampled runs report None
    check_iii = (v_avg - cond_v).sup_abs() == 0 if enumerated else None
    x_avg = weighted_average(xs, w)
    cond_x = conditional_expectation(fine_X, fine_pi)
    lhs = float(norm.evaluate(x_avg - cond_x))
    dist = float(norm.evaluate(Xr - Vr))
    C = sum(1.0 / float(m) for m in pi.masses) * norm.unit_norm() * l1_constant(norm)
    rhs = (C + 1.0) * dist
    check_iv = lhs <= rhs * (1 + 1e-12) + 1e-12
    checks = {"equidistributed": check_i, "difference_equidistributed": check_ii,
              "v_average_is_conditional_mean": check_iii,
              "norm_bound": check_iv}
    details = {"enumerated": enumerated, "norm": norm.name}
    return SwapAverageReport(len(perms), checks, lhs, rhs, C, dist, x_avg, details)
