import math
from fractions import Fraction

import pytest

from rirs.analytic import AnalyticRearrangement, SignedVariable
from rirs.errors import PreconditionError, SpecError
from rirs.fatou import fatou_probe_lemma31, fatou_probe_truncation
from rirs.measure import StepVariable
from rirs.risk import RiskMeasureSpec

RHO = RiskMeasureSpec.parse("example21:orlicz:exp")
X_OUT = SignedVariable.negative_of(AnalyticRearrangement.log_power(1.0, 1.0))
X_HEART = SignedVariable.negative_of(AnalyticRearrangement.log_power(1.0, 0.5))


def test_truncation_values_match_closed_form():
    rep = fatou_probe_truncation(RHO, X_OUT)
    # truncations are bounded, so rho(X_n) = -E[max(X, -n)] = 1 - e^{-n}
    for n, v in zip(rep.levels, rep.values):
        assert v == pytest.approx(1.0 - math.exp(-n), abs=1e-12)
    assert rep.rho_X == pytest.approx(2.0)
    assert rep.gap == pytest.approx(1.0, abs=1e-6)
    assert rep.verdict == "FATOU_FAILS"


def test_heart_input_has_no_gap():
    rep = fatou_probe_truncation(RHO, X_HEART)
    assert rep.gap <= 1e-6
    assert rep.verdict == "FATOU_HOLDS_ALONG_PROBE"


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
def test_expected_shortfall_is_fatou_along_truncations(alpha):
    rep = fatou_probe_truncation(RiskMeasureSpec.es(alpha), X_OUT)
    assert rep.rho_X == pytest.approx(1.0 + math.log(1.0 / alpha), rel=1e-10)
    assert rep.verdict == "FATOU_HOLDS_ALONG_PROBE"


def test_short_level_list_rejected():
    with pytest.raises(SpecError):
        fatou_probe_truncation(RHO, X_OUT, levels=[1, 2, 3])


def test_domination_probe_analytic_closed_form():
    Y = SignedVariable.from_step(StepVariable.constant(0))
    seq = [2.0 ** -n for n in range(1, 41)]
    rep = fatou_probe_lemma31(RHO, X_OUT, Y, seq, seq)
    for a, v in zip(seq, rep.values):
        # Y_n = X + a off (0, a], 0 on (0, a]; bounded, so rho = -E[Y_n]
        assert v == pytest.approx(1.0 - a * (1.0 + math.log(1.0 / a)) - a * (1.0 - a), abs=1e-12)
    assert rep.gap == pytest.approx(1.0, abs=1e-6)
    assert rep.verdict == "FATOU_FAILS"


def test_domination_probe_on_steps():
    X = StepVariable.uniform([-4, -1, 2, 3])
    Y = StepVariable.uniform([0, 0, 2, 3])
    seq = [Fraction(1, 2 ** n) for n in range(1, 41)]
    rho = RiskMeasureSpec.es(Fraction(1, 2))
    rep = fatou_probe_lemma31(rho, X, Y, seq, seq)
    assert all(v <= rep.rho_X for v in rep.values)
    assert rep.gap <= 1e-6


def test_domination_preconditions():
    X = StepVariable.uniform([0, 1])
    with pytest.raises(PreconditionError):
        fatou_probe_lemma31(RHO, X, StepVariable.uniform([-1, 1]), [1, Fraction(1, 2)], [1, Fraction(1, 2)])
    with pytest.raises(PreconditionError):
        fatou_probe_lemma31(RHO, X, X, [Fraction(1, 2), 1], [1, 1])
    with pytest.raises(PreconditionError):
        fatou_probe_lemma31(RHO, X_OUT, X_HEART, [0.5, 0.25], [0.5, 0.25])


def test_report_json_keys():
    rep = fatou_probe_truncation(RHO, X_OUT, levels=range(1, 8))
    assert set(rep.to_json()) >= {"gap", "verdict", "values", "liminf", "rho_X"}
