"""Step-function random variables on ((0,1), Lebesgue).

A :class:`StepVariable` is a finite list of cells laid out left to right on
(0,1). Widths are exact rationals summing to one; values may be ints,
Fractions or floats. When every value is rational the arithmetic below stays
exact, which is what the equidistribution and conditional-mean checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .errors import CapacityError, DomainError, PreconditionError, StructureError

__all__ = [
    "StepVariable",
    "Partition",
    "common_refinement",
    "decreasing_rearrangement",
    "signed_decreasing_rearrangement",
    "quantile",
    "comonotone_coupling",
    "conditional_expectation",
    "random_rearrangement",
    "place_equidistributed_copy",
    "lift_partition",
]


def _as_width(w) -> Fraction:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, (int, Rational)):
        return Fraction(w)
    if isinstance(w, str):
        return Fraction(w)
    return Fraction(w)


def _is_exact(v) -> bool:
    return isinstance(v, Rational)


@dataclass(frozen=True)
class StepVariable:
    """Random variable constant on consecutive cells of (0,1).

    ``cells`` is a sequence of ``(width, value)`` pairs. The constructor
    normalizes widths to :class:`fractions.Fraction` and rejects non-positive
    widths or widths that do not sum to exactly one.
    """

    cells: tuple

    def __post_init__(self):
        cells = tuple((_as_width(w), v) for w, v in self.cells)
        if not cells:
            raise StructureError("a step variable needs at least one cell")
        for i, (w, _) in enumerate(cells):
            if w <= 0:
                raise StructureError(f"cell {i} has non-positive width {w}")
        total = sum(w for w, _ in cells)
        if total != 1:
            raise StructureError(f"cell widths sum to {total}, not 1")
        object.__setattr__(self, "cells", cells)

    # constructors
    @classmethod
    def uniform(cls, values) -> "StepVariable":
        values = list(values)
        w = Fraction(1, len(values))
        return cls(tuple((w, v) for v in values))

    @classmethod
    def constant(cls, c) -> "StepVariable":
        return cls(((Fraction(1), c),))

    @classmethod
    def from_pairs(cls, widths, values) -> "StepVariable":
        return cls(tuple(zip(widths, values)))

    @classmethod
    def indicator(cls, a, b, value=1) -> "StepVariable":
        """``value`` on (a, b), zero elsewhere."""
        a, b = Fraction(a), Fraction(b)
        if not 0 <= a < b <= 1:
            raise DomainError(f"need 0 <= a < b <= 1, got ({a}, {b})")
        pieces = [(a, 0), (b - a, value), (1 - b, 0)]
        return cls(tuple((w, v) for w, v in pieces if w > 0))

    # accessors
    @property
    def widths(self) -> tuple:
        return tuple(w for w, _ in self.cells)

    @property
    def values(self) -> tuple:
        return tuple(v for _, v in self.cells)

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def exact(self) -> bool:
        return all(_is_exact(v) for v in self.values)

    def breakpoints(self) -> tuple:
        out = [Fraction(0)]
        for w, _ in self.cells:
            out.append(out[-1] + w)
        return tuple(out)

    def mean(self):
        return sum(w * v for w, v in self.cells)

    def sup_abs(self):
        return max(abs(v) for v in self.values)

    def aggregate(self) -> tuple:
        """Sorted ``(value, total width)`` pairs; the law of the variable."""
        acc: dict = {}
        for w, v in self.cells:
            acc[v] = acc.get(v, Fraction(0)) + w
        return tuple(sorted(acc.items(), key=lambda kv: kv[0]))

    def equidistributed(self, other: "StepVariable") -> bool:
        return self.aggregate() == other.aggregate()

    def prob(self, predicate) -> Fraction:
        return sum((w for w, v in self.cells if predicate(v)), Fraction(0))

    # pointwise algebra
    def map(self, f) -> "StepVariable":
        return StepVariable(tuple((w, f(v)) for w, v in self.cells))

    def __neg__(self):
        return self.map(lambda v: -v)

    def __abs__(self):
        return self.map(abs)

    def scale(self, a) -> "StepVariable":
        return self.map(lambda v: a * v)

    def shift(self, m) -> "StepVariable":
        return self.map(lambda v: v + m)

    def positive_part(self) -> "StepVariable":
        return self.map(lambda v: v if v > 0 else 0 * v)

    def negative_part(self) -> "StepVariable":
        return self.map(lambda v: -v if v < 0 else 0 * v)

    def combine(self, other: "StepVariable", op) -> "StepVariable":
        widths, (a, b) = common_refinement(self, other)
        return StepVariable(tuple((w, op(x, y)) for w, x, y in zip(widths, a, b)))

    def __add__(self, other):
        if isinstance(other, StepVariable):
            return self.combine(other, lambda x, y: x + y)
        return self.shift(other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, StepVariable):
            return self.combine(other, lambda x, y: x - y)
        return self.shift(-other)

    def __mul__(self, a):
        if isinstance(a, StepVariable):
            return self.combine(a, lambda x, y: x * y)
        return self.scale(a)

    __rmul__ = __mul__

    def refine_to(self, breakpoints) -> "StepVariable":
        """Same function on a finer grid given by ``breakpoints`` (must include ours)."""
        own = self.breakpoints()
        cells = []
        j = 0
        for a, b in zip(breakpoints, breakpoints[1:]):
            while own[j + 1] <= a:
                j += 1
            cells.append((b - a, self.cells[j][1]))
        return StepVariable(tuple(cells))

    def truncate(self, n) -> "StepVariable":
        """Pointwise median(-n, X, n)."""
        if n < 0:
            raise DomainError("truncation level must be >= 0")
        return self.map(lambda v: max(-n, min(v, n)))

    def top_integral(self, s):
        """Integral of the decreasing rearrangement of |X| over (0, s]."""
        s = Fraction(s) if not isinstance(s, float) else Fraction(s)
        remaining = s
        total = 0
        for w, v in decreasing_rearrangement(self).cells:
            if remaining <= 0:
                break
            take = w if w < remaining else remaining
            total += take * v
            remaining -= take
        return total

    # serialization
    def to_json(self) -> dict:
        cells = []
        for w, v in self.cells:
            if isinstance(v, Fraction) and v.denominator != 1:
                val = [v.numerator, v.denominator]
            elif isinstance(v, Rational):
                val = int(v)
            else:
                val = float(v)
            cells.append([w.numerator, w.denominator, val])
        return {"kind": "step", "cells": cells}

    @classmethod
    def from_json(cls, data: dict) -> "StepVariable":
        if data.get("kind") != "step":
            raise StructureError("expected kind 'step'")
        cells = []
        for row in data["cells"]:
            if len(row) != 3:
                raise StructureError(f"cell row {row!r} must be [num, den, value]")
            num, den, val = row
            if isinstance(val, list):
                val = Fraction(val[0], val[1])
            cells.append((Fraction(num, den), val))
        return cls(tuple(cells))


def common_refinement(*variables: StepVariable):
    """Merge breakpoints of several step variables.

    Returns ``(widths, columns)`` where ``columns[i]`` lists the values of
    ``variables[i]`` on the merged cells. The merged grid has at most
    ``sum(len(v)) - len(v) + 1`` cells.
    """
    cuts = sorted(set().union(*(v.breakpoints() for v in variables)))
    widths = tuple(b - a for a, b in zip(cuts, cuts[1:]))
    columns = []
    for var in variables:
        own = var.breakpoints()
        col = []
        j = 0
        for a in cuts[:-1]:
            while own[j + 1] <= a:
                j += 1
            col.append(var.cells[j][1])
        columns.append(tuple(col))
    return widths, columns


def decreasing_rearrangement(X: StepVariable) -> StepVariable:
    """Cells of |X| sorted by value, largest first (widths kept)."""
    cells = sorted(((w, abs(v)) for w, v in X.cells), key=lambda c: -c[1])
    return StepVariable(tuple(cells))


def signed_decreasing_rearrangement(X: StepVariable) -> StepVariable:
    """Cells of X itself sorted in decreasing order (no absolute value)."""
    cells = sorted(X.cells, key=lambda c: -c[1])
    return StepVariable(tuple(cells))


def _quantile_from_aggregate(agg, t):
    acc = Fraction(0)
    for v, w in agg:
        acc += w
        if acc >= t:
            return v
    return agg[-1][0]


def quantile(X: StepVariable, t):
    """Left-continuous quantile: the smallest v with P(X <= v) >= t.

    Relation to the decreasing rearrangement of -X: quantile(X, t) equals
    -(signed decreasing rearrangement of -X) evaluated just left of t.
    """
    tf = Fraction(t)
    if not 0 < tf < 1:
        raise DomainError(f"quantile level must lie in (0,1), got {t}")
    return _quantile_from_aggregate(X.aggregate(), tf)


def _quantile_steps(X: StepVariable):
    """Breakpoints ``0 = u0 < u1 < ... = 1`` and the quantile value on (u_i, u_{i+1}]."""
    cuts = [Fraction(0)]
    vals = []
    for v, w in X.aggregate():
        cuts.append(cuts[-1] + w)
        vals.append(v)
    return cuts, vals


def comonotone_coupling(X1p: StepVariable, X2: StepVariable) -> StepVariable:
    """Realize the law of ``X2`` below ``X1p`` by pairing quantiles.

    Requires quantile dominance q1 >= q2; on failure raises
    :class:`PreconditionError` whose ``witness`` is a level t with q1(t) < q2(t).
    The result lives on a refinement of X1p's grid and satisfies
    result <= X1p cell by cell and result ~ X2 exactly.
    """
    cuts1, vals1 = _quantile_steps(X1p)
    cuts2, vals2 = _quantile_steps(X2)
    merged = sorted(set(cuts1) | set(cuts2))
    for a, b in zip(merged, merged[1:]):
        q1 = _quantile_from_aggregate(X1p.aggregate(), b)
        q2 = _quantile_from_aggregate(X2.aggregate(), b)
        if q1 < q2:
            t = (a + b) / 2
            raise PreconditionError(
                f"quantile dominance fails at t={t}: q1={q1} < q2={q2}", witness=t
            )

    # rank transform of X1p: ties broken by position
    order = sorted(range(len(X1p)), key=lambda i: (X1p.cells[i][1], i))
    start = {}
    acc = Fraction(0)
    for i in order:
        start[i] = acc
        acc += X1p.cells[i][0]

    out = []
    for i, (w, _) in enumerate(X1p.cells):
        lo, hi = start[i], start[i] + w
        inner = [c for c in cuts2 if lo < c < hi]
        edges = [lo] + inner + [hi]
        for a, b in zip(edges, edges[1:]):
            k = 0
            while cuts2[k + 1] < b:
                k += 1
            out.append((b - a, vals2[k]))
    return StepVariable(tuple(out))


@dataclass(frozen=True)
class Partition:
    """Finite partition of the cells of a step variable into blocks.

    ``blocks`` are tuples of cell indices; ``masses`` their exact probabilities.
    """

    blocks: tuple
    masses: tuple

    def __post_init__(self):
        blocks = tuple(tuple(sorted(b)) for b in self.blocks)
        masses = tuple(Fraction(m) for m in self.masses)
        if len(blocks) != len(masses):
            raise StructureError("one mass per block required")
        seen = set()
        for b in blocks:
            if not b:
                raise StructureError("empty block")
            for i in b:
                if i in seen:
                    raise StructureError(f"cell {i} appears in two blocks")
                seen.add(i)
        if seen != set(range(len(seen))):
            raise StructureError("blocks must cover cells 0..n-1")
        if any(m <= 0 for m in masses):
            raise StructureError("block masses must be positive")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "masses", masses)

    @property
    def n_cells(self) -> int:
        return sum(len(b) for b in self.blocks)

    @classmethod
    def from_blocks(cls, X: StepVariable, blocks) -> "Partition":
        masses = [sum(X.cells[i][0] for i in b) for b in blocks]
        return cls(tuple(tuple(b) for b in blocks), tuple(masses))

    @classmethod
    def single(cls, X: StepVariable) -> "Partition":
        return cls.from_blocks(X, [range(len(X))])

    def block_of(self) -> dict:
        return {i: k for k, b in enumerate(self.blocks) for i in b}

    def check_compatible(self, X: StepVariable) -> None:
        if self.n_cells != len(X):
            raise StructureError(
                f"partition covers {self.n_cells} cells, variable has {len(X)}"
            )
        for b, m in zip(self.blocks, self.masses):
            if sum(X.cells[i][0] for i in b) != m:
                raise StructureError(f"block {b} mass does not match the variable's cells")


def conditional_expectation(X: StepVariable, pi: Partition) -> StepVariable:
    """Replace X on each block by its block-mass-weighted mean."""
    pi.check_compatible(X)
    means = []
    for b, m in zip(pi.blocks, pi.masses):
        means.append(sum(X.cells[i][0] * X.cells[i][1] for i in b) / m)
    owner = pi.block_of()
    return StepVariable(tuple((w, means[owner[i]]) for i, (w, _) in enumerate(X.cells)))


def lift_partition(pi: Partition, coarse: StepVariable, fine: StepVariable) -> Partition:
    """Carry a partition of ``coarse``'s cells to a refinement ``fine``."""
    outer = coarse.breakpoints()
    owner = pi.block_of()
    blocks = [[] for _ in pi.blocks]
    j = 0
    for i, a in enumerate(fine.breakpoints()[:-1]):
        while outer[j + 1] <= a:
            j += 1
        blocks[owner[j]].append(i)
    return Partition(tuple(tuple(b) for b in blocks), pi.masses)


def random_rearrangement(X: StepVariable, seed, max_splits: int = 0) -> StepVariable:
    """Seeded equidistributed copy: optional cell splits, then a permutation."""
    if max_splits < 0:
        raise DomainError("max_splits must be >= 0")
    rng = np.random.default_rng(seed)
    cells = list(X.cells)
    n_splits = int(rng.integers(0, max_splits + 1)) if max_splits else 0
    for _ in range(n_splits):
        i = int(rng.integers(len(cells)))
        den = int(rng.integers(2, 6))
        num = int(rng.integers(1, den))
        w, v = cells[i]
        cells[i : i + 1] = [(w * Fraction(num, den), v), (w * Fraction(den - num, den), v)]
    perm = rng.permutation(len(cells))
    return StepVariable(tuple(cells[int(k)] for k in perm))


def _fill(target_cells, pieces):
    """Lay ``pieces`` (width, value) left to right into ``target_cells`` (widths).

    Returns, per target cell, the list of sub-cells; leftover room is zero.
    """
    out = []
    pieces = list(pieces)
    k = 0
    used = Fraction(0)
    for room in target_cells:
        sub = []
        left = room
        while left > 0 and k < len(pieces):
            w, v = pieces[k]
            avail = w - used
            take = avail if avail <= left else left
            sub.append((take, v))
            left -= take
            used += take
            if used == w:
                k += 1
                used = Fraction(0)
        if left > 0:
            sub.append((left, None))
        out.append(sub)
    return out, k == len(pieces)


def place_equidistributed_copy(X: StepVariable, support) -> StepVariable:
    """Copy of X supported in the given cells of X's own grid.

    Nonzero cells of X are packed in order into the support cells (splitting
    where needed); everything else is zero.
    """
    support = sorted(set(support))
    if any(i < 0 or i >= len(X) for i in support):
        raise StructureError("support index out of range")
    nonzero = [(w, v) for w, v in X.cells if v != 0]
    need = sum((w for w, _ in nonzero), Fraction(0))
    room = sum((X.cells[i][0] for i in support), Fraction(0))
    if room < need:
        raise CapacityError(f"support mass {room} < P(X != 0) = {need}")
    zero = 0 * X.values[0] if X.values else 0
    filled, done = _fill([X.cells[i][0] for i in support], nonzero)
    assert done
    slot = dict(zip(support, filled))
    cells = []
    for i, (w, _) in enumerate(X.cells):
        if i not in slot:
            cells.append((w, zero))
            continue
        for sw, sv in slot[i]:
            cells.append((sw, zero if sv is None else sv))
    return StepVariable(tuple(cells))
