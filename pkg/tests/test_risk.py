import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import step_variables
from rirs.errors import PreconditionError, SpecError
from rirs.measure import StepVariable, random_rearrangement
from rirs.risk import (
    Distortion,
    RiskMeasureSpec,
    coherence_suite,
    counterexample_rho,
    discretization_profile,
    distortion_rho,
    expected_shortfall,
    geometric_discretization,
    phi_sup,
)


def atoms(X):
    N = math.lcm(*[w.denominator for w in X.widths])
    return [v for w, v in X.cells for _ in range(int(w * N))]


def phi_brute(w_vals, x_vals):
    """Oracle: max over all placements of the X cells against the weight cells."""
    best = max(sum(a * b for a, b in zip(w_vals, p)) for p in itertools.permutations(x_vals))
    return Fraction(best, len(w_vals))


@st.composite
def weight_and_variable(draw, max_cells=7):
    n = draw(st.integers(1, max_cells))
    w = draw(st.lists(st.integers(0, 12), min_size=n, max_size=n))
    x = draw(st.lists(st.integers(-20, 20), min_size=n, max_size=n))
    return w, x


# expected shortfall and distortions ---------------------------------------------------

@given(step_variables(), st.integers(1, 12))
def test_es_matches_lowest_atoms(X, k):
    a = sorted(atoms(X))
    N = len(a)
    alpha = Fraction(min(k, N), N)
    j = int(alpha * N)
    assert expected_shortfall(X, alpha) == -sum(a[:j], Fraction(0)) / j


def test_es_examples():
    X = StepVariable.uniform([1, 2, 3, 4])
    assert expected_shortfall(X, Fraction(1, 2)) == Fraction(-3, 2)
    assert expected_shortfall(X, 1) == Fraction(-5, 2)
    with pytest.raises(SpecError):
        expected_shortfall(X, 0)


@given(step_variables(), st.sampled_from([Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(1)]))
def test_es_distortion_agrees(X, alpha):
    assert distortion_rho(X, Distortion("es", alpha)) == expected_shortfall(X, alpha)


@given(step_variables())
def test_identity_distortion_is_negative_mean(X):
    assert distortion_rho(X, Distortion("identity")) == -X.mean()


def test_distortion_validation():
    with pytest.raises(SpecError):
        Distortion("custom", fn=lambda u: u / 2)
    with pytest.raises(SpecError):
        Distortion("power", -1.0)
    assert Distortion("power", 0.5).concave and not Distortion("power", 2.0).concave


# phi construction ------------------------------------------------------------------

@given(weight_and_variable())
def test_phi_sup_matches_permutation_maximum(pair):
    w, x = pair
    assert phi_sup(StepVariable.uniform(w), StepVariable.uniform(x)) == phi_brute(w, x)


def test_phi_sup_rejects_negative_weights():
    with pytest.raises(PreconditionError):
        phi_sup(StepVariable.uniform([1, -1]), StepVariable.uniform([0, 1]))


W = StepVariable.uniform([0, 1, 2])


@given(step_variables(), step_variables())
def test_phi_subadditive(X, Y):
    assert phi_sup(W, X + Y) <= phi_sup(W, X) + phi_sup(W, Y)


@given(step_variables(), step_variables(nonneg=True))
def test_phi_monotone(X, Z):
    assert phi_sup(W, X) <= phi_sup(W, X + Z)


@given(step_variables(), st.fractions(0, 10, max_denominator=7))
def test_phi_positively_homogeneous(X, lam):
    assert phi_sup(W, X.scale(lam)) == lam * phi_sup(W, X)


@given(step_variables(), st.integers(0, 10 ** 6))
def test_phi_law_invariant(X, seed):
    assert phi_sup(W, random_rearrangement(X, seed, max_splits=3)) == phi_sup(W, X)


def test_counterexample_rho_shift():
    X = StepVariable.uniform([1, -2, 5])
    m = Fraction(3)
    # the shift moves rho by -m (1 + E[w]) rather than -m
    assert counterexample_rho(W, X.shift(m)) == counterexample_rho(W, X) - m * (1 + W.mean())


# geometric discretization ---------------------------------------------------------------

@given(step_variables(), st.sampled_from([1.01, 1.1, 1.25, 1.5, 2.0]))
def test_discretization_sandwich(X, a):
    U = geometric_discretization(X, a)
    for (w, x), (_, u) in zip(X.cells, U.cells):
        x = float(x)
        if x > 0:
            assert x / a <= u * (1 + 1e-12) and u <= x
        elif x < 0:
            assert a * x <= u * (1 - 1e-12) and u <= x
        else:
            assert u == 0


def test_nested_grids_share_points():
    X = StepVariable.uniform([Fraction(7, 3), Fraction(-5, 2), Fraction(11, 10), 0])
    coarse = geometric_discretization(X, 1.01 ** 4, base=1.01)
    fine = geometric_discretization(X, 1.01 ** 2, base=1.01)
    assert all(c <= f for c, f in zip(coarse.values, fine.values))


def test_ratio_must_be_power_of_base():
    with pytest.raises(SpecError):
        geometric_discretization(StepVariable.constant(1), 1.03, base=1.02)


@given(step_variables(nonneg=True))
def test_discretization_profile_monotone_and_below(X):
    prof = discretization_profile(W, X)
    assert prof["monotone"]
    assert prof["sandwich_ok"]
    # rounding down loses at most a factor 1/a on non-negative inputs
    assert prof["values"][-1] >= prof["target"] / 1.01 - 1e-12


# specs and the coherence tester ---------------------------------------------------------

@pytest.mark.parametrize("name", ["es:0.25", "es:1", "mean", "distortion:power:0.5", "distortion:dual_power:2"])
def test_coherent_measures_pass(name):
    rep = coherence_suite(RiskMeasureSpec.parse(name), trials=150, seed=3)
    assert rep["all_pass"], rep["axioms"]


def test_square_fails_homogeneity():
    rep = coherence_suite(RiskMeasureSpec.parse("square"), trials=50, seed=1)
    assert rep["axioms"]["positive_homogeneity"]["violations"] > 0
    assert rep["axioms"]["positive_homogeneity"]["witness"] is not None


def test_supphi_is_not_cash_invariant():
    rep = coherence_suite(RiskMeasureSpec.parse("supphi"), trials=50, seed=1)
    assert rep["axioms"]["cash_invariance"]["violations"] > 0
    for ax in ("monotonicity", "subadditivity", "positive_homogeneity", "law_invariance"):
        assert rep["axioms"][ax]["violations"] == 0


def test_parse_names():
    assert RiskMeasureSpec.parse("es:0.5").name == "es:1/2"
    assert RiskMeasureSpec.parse("example21:orlicz:exp").name == "example21:orlicz:exp"
    with pytest.raises(SpecError):
        RiskMeasureSpec.parse("var:0.5")
