from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from rirs.measure import StepVariable

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance results, filled by tests/test_acceptance.py: criterion -> list of (label, ok, detail)
ACCEPTANCE = {}


@pytest.fixture
def acceptance(capsys):
    """Record a criterion sub-check and echo it immediately."""

    def record(criterion: int, label: str, ok: bool, detail: str = ""):
        ACCEPTANCE.setdefault(criterion, []).append((label, ok, detail))
        with capsys.disabled():
            print(f"\n  criterion {criterion} [{label}]: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[crit]
        ok = all(c[1] for c in checks)
        failed = [c[0] for c in checks if not c[1]]
        tail = "" if ok else f"  (failed: {', '.join(failed)})"
        terminalreporter.write_line(f"CRITERION {crit}: {'PASS' if ok else 'FAIL'}{tail}")


@st.composite
def step_variables(draw, max_cells=6, span=12, den=4, nonneg=False):
    """Step variables with rational widths and rational values."""
    n = draw(st.integers(1, max_cells))
    raw = draw(st.lists(st.integers(1, 6), min_size=n, max_size=n))
    total = sum(raw)
    lo = 0 if nonneg else -span * den
    vals = draw(st.lists(st.integers(lo, span * den), min_size=n, max_size=n))
    return StepVariable(tuple((Fraction(r, total), Fraction(v, den)) for r, v in zip(raw, vals)))


@st.composite
def uniform_step_variables(draw, max_cells=6, span=12, den=4, nonneg=False):
    n = draw(st.integers(1, max_cells))
    lo = 0 if nonneg else -span * den
    vals = draw(st.lists(st.integers(lo, span * den), min_size=n, max_size=n))
    return StepVariable.uniform([Fraction(v, den) for v in vals])
