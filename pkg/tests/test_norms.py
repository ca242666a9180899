import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import step_variables
from rirs.analytic import AnalyticRearrangement, SignedVariable
from rirs.measure import StepVariable, random_rearrangement
from rirs.norms import (
    NormSpec,
    appendix_b_norm,
    appendix_b_terms,
    hardy_littlewood_sup,
    heart_membership,
    l1_constant,
    lp_norm,
    luxemburg_norm,
)
from rirs.orlicz import OrliczFunction


def window_norm_brute(X: StepVariable) -> Fraction:
    """Oracle: max over n of n 2^n * (sum of the largest |X| atoms up to mass s_n)."""
    N = math.lcm(*[w.denominator for w in X.widths])
    atoms = sorted((abs(v) for w, v in X.cells for _ in range(int(w * N))), reverse=True)
    best = Fraction(0)
    n = 1
    while True:
        s = Fraction(1, 2 ** n * math.factorial(n))
        full = int(s * N)
        mass = sum(atoms[:full], Fraction(0)) / N + (s - Fraction(full, N)) * (atoms[full] if full < N else 0)
        best = max(best, n * 2 ** n * mass)
        if n * 2 ** n * s * atoms[0] <= best and s * N < 1:
            return best
        n += 1


@given(step_variables())
def test_window_norm_matches_brute_force(X):
    assert appendix_b_norm(X) == window_norm_brute(X)


def test_window_norm_landmarks():
    assert appendix_b_norm(StepVariable.constant(1)) == 1
    assert appendix_b_norm(StepVariable.indicator(0, Fraction(1, 100))) == Fraction(6, 25)


def test_window_norm_staircase_limit():
    cert = appendix_b_terms(AnalyticRearrangement.staircase(1))
    assert cert.value == pytest.approx(3.0)
    assert not cert.attained
    assert all(t < 3.0 for t in cert.terms)
    assert cert.terms[1] == pytest.approx(1.635532333438687, rel=1e-12)


@given(step_variables(), step_variables(), st.fractions(-5, 5, max_denominator=6))
def test_window_norm_axioms(X, Y, a):
    nx, ny = appendix_b_norm(X), appendix_b_norm(Y)
    assert appendix_b_norm(X + Y) <= nx + ny
    assert appendix_b_norm(X.scale(a)) == abs(a) * nx
    assert appendix_b_norm(random_rearrangement(X, 7)) == nx


@given(step_variables(), st.sampled_from([1.0, 1.5, 2.0, 3.0, 4.5]))
def test_luxemburg_power_equals_lp(X, p):
    a = luxemburg_norm(X, OrliczFunction.power(p))
    b = lp_norm(X, p)
    assert abs(a - b) <= 1e-9 * max(1.0, b)


@given(step_variables())
def test_luxemburg_feasible_end(X):
    phi = OrliczFunction.exp()
    lam = luxemburg_norm(X, phi)
    if lam > 0:
        m = sum(float(w) * phi(abs(float(v)) / lam) for w, v in X.cells)
        assert m <= 1.0 + 1e-12


def test_luxemburg_log_tail_is_two():
    q = AnalyticRearrangement.log_power(1.0, 1.0)
    assert luxemburg_norm(q, OrliczFunction.exp()) == pytest.approx(2.0, rel=1e-7)
    assert luxemburg_norm(AnalyticRearrangement.log_power(1.0, 2.0), OrliczFunction.exp()) == math.inf


def test_lp_of_power_profile():
    q = AnalyticRearrangement.power(1.0, 0.5)
    assert lp_norm(q, 1.0) == pytest.approx(2.0)
    assert lp_norm(q, 1.5) == pytest.approx(4.0 ** (1 / 1.5))
    assert lp_norm(q, 2.0) == math.inf


@given(step_variables(), st.sampled_from(["lp:1", "lp:2", "lp:inf", "orlicz:exp", "orlicz:huber", "appendix_b"]))
def test_l1_constant_bound(X, name):
    spec = NormSpec.parse(name)
    assert lp_norm(X, 1.0) <= l1_constant(spec) * float(spec.evaluate(X)) * (1 + 1e-9) + 1e-12


@st.composite
def same_length_pairs(draw):
    n = draw(st.integers(1, 6))
    vals = st.lists(st.integers(-20, 20), min_size=n, max_size=n)
    return StepVariable.uniform(draw(vals)), StepVariable.uniform(draw(vals))


@given(same_length_pairs())
def test_hardy_littlewood_is_permutation_maximum(pair):
    X, Y = pair
    xs = [abs(v) for v in X.values]
    ys = [abs(v) for v in Y.values]
    brute = max(sum(a * b for a, b in zip(xs, p)) for p in itertools.permutations(ys))
    assert hardy_littlewood_sup(X, Y) == Fraction(brute, len(xs))


def test_heart_membership_classes():
    phi = OrliczFunction.exp()
    assert heart_membership(AnalyticRearrangement.log_power(1, 0.5), phi).status == "InHeart"
    assert heart_membership(AnalyticRearrangement.log_power(1, 1), phi).status == "InSpaceNotHeart"
    assert heart_membership(AnalyticRearrangement.log_power(1, 2), phi).status == "NotInSpace"


def test_norm_spec_parse_and_unit():
    assert NormSpec.parse("lp:2").evaluate(StepVariable.uniform([1, 2])) == pytest.approx(math.sqrt(2.5))
    for name in ("lp:1", "lp:inf", "orlicz:exp", "orlicz:power:3", "appendix_b"):
        spec = NormSpec.parse(name)
        assert float(spec.evaluate(StepVariable.constant(1))) == pytest.approx(spec.unit_norm(), rel=1e-9)


def test_signed_analytic_norm():
    X = SignedVariable.negative_of(AnalyticRearrangement.log_power(1.0, 1.0))
    assert lp_norm(X, 2.0) == pytest.approx(math.sqrt(2.0))
