import math
from fractions import Fraction

import pytest

from rirs.analytic import AnalyticRearrangement
from rirs.aocea import (
    aocea_orlicz_certificate,
    aocea_search_appendix_b,
    staircase_copy_distance,
    verify_appendix_b_chain,
)
from rirs.errors import PreconditionError, SpecError
from rirs.orlicz import OrliczFunction

EXP = OrliczFunction.exp()
LOG_TAIL = AnalyticRearrangement.log_power(1.0, 1.0)


def tail_moment(n, eta=0.5):
    """Oracle: int_n^inf (e^{eta x} - 1) e^{-x} dx for an Exp(1) variable."""
    return math.exp(-(1 - eta) * n) / (1 - eta) - math.exp(-n)


@pytest.mark.parametrize("eps,k", [(0.1, 20), (0.01, 200)])
def test_certificate_matches_tail_oracle(eps, k):
    cert = aocea_orlicz_certificate(LOG_TAIL, EXP, eps)
    assert cert.eta == 0.5 and cert.k == k
    n = cert.indices[0]
    assert all(i == n for i in cert.indices)
    # n is the first index meeting the budget
    assert k * tail_moment(n) <= 1 < k * tail_moment(n - 1)
    assert cert.budget == pytest.approx(k * tail_moment(n), rel=1e-9)
    assert cert.reevaluated_norm <= eps
    assert cert.disjoint_mass == pytest.approx(k * math.exp(-n))


def test_certificate_eps_point_one_values():
    cert = aocea_orlicz_certificate(LOG_TAIL, EXP, 0.1)
    assert cert.indices[0] == 8
    assert cert.budget == pytest.approx(0.7259, abs=1e-4)


def test_certificate_heart_and_outside():
    cert = aocea_orlicz_certificate(AnalyticRearrangement.log_power(1.0, 0.5), EXP, 0.1)
    assert cert.trivial and cert.k == 1
    with pytest.raises(PreconditionError):
        aocea_orlicz_certificate(AnalyticRearrangement.log_power(1.0, 2.0), EXP, 0.1)
    with pytest.raises(SpecError):
        aocea_orlicz_certificate(LOG_TAIL, EXP, 0.0)


def c(n):
    return Fraction(1, 2 ** n * math.factorial(n + 1))


def s(n):
    return Fraction(1, 2 ** n * math.factorial(n))


def top_integral_bounds(x, N=80):
    """Oracle: lower and upper bounds for int_0^x X* with X* = n! on [c_{n+1}, c_n).

    Levels up to N are summed exactly; the rest contribute at most sum_{n>N} 2^{-n} = 2^{-N}.
    """
    total = Fraction(0)
    for n in range(1, N + 1):
        lo, hi = c(n + 1), c(n)
        overlap = max(Fraction(0), min(hi, x) - lo)
        total += math.factorial(n) * overlap
    return total, total + Fraction(1, 2 ** N)


def test_chain_rows_agree_with_oracle():
    rows = verify_appendix_b_chain(range(2, 13))
    assert [r["m"] for r in rows] == list(range(2, 13))
    for r in rows:
        m = r["m"]
        lower_lo, _ = top_integral_bounds(c(m))
        upper_lo, upper_hi = top_integral_bounds(s(m))
        assert lower_lo >= Fraction(1, (m + 1) * 2 ** m)
        assert m * 2 ** m * upper_hi <= 3
        assert r["lower_holds"] and r["upper_holds"]
        # the library's upper bound sits between the oracle's exact partial sum and its bound
        scale = m * 2 ** m
        assert float(scale * upper_lo) - 1e-12 <= r["upper_scaled"] <= float(scale * upper_hi) + 1e-9


def test_chain_needs_m_at_least_two():
    with pytest.raises(SpecError):
        verify_appendix_b_chain([1])


def test_single_copy_distance_is_the_staircase_limit():
    from rirs.aocea import _random_copy
    import numpy as np

    copy = _random_copy(np.random.default_rng(0), split_zero=False)
    out = staircase_copy_distance([copy], [1.0])
    assert out["distance"] == pytest.approx(3.0, abs=1e-9)


def test_small_search_stays_above_quarter():
    rep = aocea_search_appendix_b(trials=200, seed=5, threads=1)
    assert rep.holds and rep.min_distance >= 0.25 - 1e-9
    assert rep.distances_by_copies["1"] == pytest.approx(3.0)
    # more copies can only help the average
    vals = [rep.distances_by_copies[str(k)] for k in range(1, 7)]
    assert vals[-1] <= vals[0]


def test_l1_control_search_gets_close():
    rep = aocea_search_appendix_b(trials=200, seed=5, norm="lp:1", threads=1)
    assert rep.holds and rep.min_distance <= 0.01


def test_search_is_reproducible():
    a = aocea_search_appendix_b(trials=30, seed=9, threads=1)
    b = aocea_search_appendix_b(trials=30, seed=9, threads=1)
    assert a.min_distance == b.min_distance and a.argmin_trial == b.argmin_trial
