import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import step_variables
from rirs.errors import DomainError, PreconditionError, StructureError
from rirs.measure import (
    Partition,
    StepVariable,
    common_refinement,
    comonotone_coupling,
    conditional_expectation,
    decreasing_rearrangement,
    lift_partition,
    place_equidistributed_copy,
    quantile,
    random_rearrangement,
)


def atoms(X: StepVariable) -> list:
    """Oracle: X as N equally likely atoms (N = lcm of the width denominators)."""
    N = math.lcm(*[w.denominator for w in X.widths])
    out = []
    for w, v in X.cells:
        out += [v] * int(w * N)
    return out


# construction ---------------------------------------------------------------

def test_widths_must_sum_to_one():
    with pytest.raises(StructureError):
        StepVariable(((Fraction(1, 2), 1), (Fraction(1, 3), 2)))


def test_nonpositive_width_rejected():
    with pytest.raises(StructureError):
        StepVariable(((Fraction(0), 1), (Fraction(1), 2)))


def test_indicator_layout():
    X = StepVariable.indicator(Fraction(1, 4), Fraction(1, 2), 3)
    assert X.widths == (Fraction(1, 4), Fraction(1, 4), Fraction(1, 2))
    assert X.values == (0, 3, 0)
    with pytest.raises(DomainError):
        StepVariable.indicator(Fraction(1, 2), Fraction(1, 4))


def test_json_round_trip():
    X = StepVariable(((Fraction(1, 3), Fraction(-5, 2)), (Fraction(2, 3), 4)))
    assert StepVariable.from_json(X.to_json()) == X


# laws and rearrangements ------------------------------------------------------

@given(step_variables())
def test_mean_matches_atoms(X):
    a = atoms(X)
    assert X.mean() == sum(a, Fraction(0)) / len(a)


@given(step_variables())
def test_decreasing_rearrangement_matches_sorted_atoms(X):
    got = atoms(decreasing_rearrangement(X))
    assert got == sorted((abs(v) for v in atoms(X)), reverse=True)


@given(step_variables(), st.integers(1, 99))
def test_quantile_matches_order_statistic(X, pct):
    t = Fraction(pct, 100)
    a = sorted(atoms(X))
    k = math.ceil(t * len(a)) - 1
    assert quantile(X, t) == a[k]


def test_quantile_level_checked():
    with pytest.raises(DomainError):
        quantile(StepVariable.constant(1), 0)


@given(step_variables(), st.integers(0, 2 ** 31 - 1))
def test_random_rearrangement_is_equidistributed(X, seed):
    Y = random_rearrangement(X, seed, max_splits=3)
    assert Y.equidistributed(X)
    a, b = atoms(X), atoms(Y)
    scale = math.lcm(len(a), len(b))
    assert sorted(a * (scale // len(a))) == sorted(b * (scale // len(b)))


@given(step_variables(), step_variables())
def test_common_refinement_preserves_both(X, Y):
    widths, (a, b) = common_refinement(X, Y)
    assert sum(widths) == 1
    assert StepVariable(tuple(zip(widths, a))).aggregate() == X.aggregate()
    assert StepVariable(tuple(zip(widths, b))).aggregate() == Y.aggregate()


@given(step_variables(), st.integers(0, 20))
def test_top_integral_matches_atoms(X, k):
    a = sorted((abs(v) for v in atoms(X)), reverse=True)
    N = len(a)
    j = min(k, N)
    assert X.top_integral(Fraction(j, N)) == sum(a[:j], Fraction(0)) / N


# coupling ------------------------------------------------------------------

@st.composite
def dominated_pairs(draw):
    X1 = draw(step_variables())
    # shrink each atom: X2 ~ X1 - (non-negative step) keeps q2 <= q1
    gap = draw(step_variables(nonneg=True))
    X2 = random_rearrangement(_lower(X1, gap), draw(st.integers(0, 999)))
    return X1, X2


def _lower(X1, gap):
    widths, (a, g) = common_refinement(X1, gap)
    return StepVariable(tuple((w, x - d) for w, x, d in zip(widths, a, g)))


@given(dominated_pairs())
def test_coupling_dominated_and_equidistributed(pair):
    X1, X2 = pair
    Z = comonotone_coupling(X1, X2)
    assert Z.aggregate() == X2.aggregate()
    widths, (z, x1) = common_refinement(Z, X1)
    assert all(a <= b for a, b in zip(z, x1))


def test_coupling_precondition_witness():
    X1 = StepVariable.uniform([0, 1])
    X2 = StepVariable.uniform([2, -5])
    with pytest.raises(PreconditionError) as info:
        comonotone_coupling(X1, X2)
    t = info.value.witness
    assert quantile(X1, t) < quantile(X2, t)


# partitions -------------------------------------------------------------------

def test_partition_validation():
    X = StepVariable.uniform([1, 2, 3])
    with pytest.raises(StructureError):
        Partition.from_blocks(X, [[0, 1], [1, 2]])
    with pytest.raises(StructureError):
        Partition.from_blocks(X, [[0], [2]])
    with pytest.raises(StructureError):
        Partition(((0, 1), (2,)), (Fraction(1, 2), Fraction(1, 2))).check_compatible(X)


def test_conditional_expectation_example():
    X = StepVariable.uniform([1, 2, 3, 4])
    pi = Partition.from_blocks(X, [[0, 1], [2, 3]])
    assert conditional_expectation(X, pi).values == (Fraction(3, 2),) * 2 + (Fraction(7, 2),) * 2


@given(step_variables(max_cells=6))
def test_conditional_expectation_preserves_block_integrals(X):
    n = len(X)
    blocks = [list(range(0, (n + 1) // 2)), list(range((n + 1) // 2, n))]
    blocks = [b for b in blocks if b]
    pi = Partition.from_blocks(X, blocks)
    C = conditional_expectation(X, pi)
    for b in pi.blocks:
        assert sum(C.cells[i][0] * C.cells[i][1] for i in b) == sum(X.cells[i][0] * X.cells[i][1] for i in b)


def test_lift_partition_follows_refinement():
    X = StepVariable.uniform([1, 2])
    pi = Partition.from_blocks(X, [[0], [1]])
    fine = StepVariable(((Fraction(1, 4), 0), (Fraction(1, 4), 0), (Fraction(1, 2), 0)))
    assert lift_partition(pi, X, fine).blocks == ((0, 1), (2,))


def test_place_equidistributed_copy():
    X = StepVariable(((Fraction(1, 4), 5), (Fraction(3, 4), 0)))
    Y = place_equidistributed_copy(X, [1])
    assert Y.equidistributed(X)
    assert Y.cells[0] == (Fraction(1, 4), 0)
