import numpy as np
import pytest

from convext import checks
from convext.checks import IMPLEMENTATIONS, Report, random_term


def test_report_line():
    r = Report("suite", "name", 2e-10, 1e-9, 5)
    assert r.passed and r.line().endswith("ok")
    assert not Report("suite", "name", 1.0, 1e-9, 5).passed


@pytest.mark.parametrize("name", list(IMPLEMENTATIONS))
def test_random_terms_are_valid(name):
    rng = np.random.default_rng(0)
    for m in (1, 2):
        ext = random_term(rng, name, m)
        assert ext.m == m
        assert ext.method is IMPLEMENTATIONS[name][2]


@pytest.mark.parametrize(
    "suite,kw",
    [
        ("extension", {"samples": 11}),
        ("oracle", {"samples": 5}),
        ("oracle", {"samples": 3, "m": 2}),
        ("convexity", {"samples": 300}),
        ("subgradient", {"samples": 100}),
        ("candidates", {"samples": 30}),
    ],
)
def test_small_suites_pass(suite, kw):
    reports = checks.SUITES[suite](seed=3, **kw)
    assert reports
    assert all(r.passed for r in reports), [r.line() for r in reports if not r.passed]


def test_failures_carry_a_replayable_configuration():
    control = checks.raw_convexity_control(samples=500)
    assert control.passed  # the violation was detected
    assert control.worst["violation"] > 0.01
