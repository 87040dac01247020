"""Closed forms, estimators, and the bubble inequality suite."""

import math
import random

import mpmath
import numpy as np
import pytest

from tcbubbles import (
    BadConfig,
    EmptySample,
    EstimateCI,
    Rat,
    TransactionCost,
    bessel_delta,
    bessel_mean,
    bound_suite,
    bubble_birth_bubble,
    bubble_birth_fundamental,
    bubble_report,
    fbm_bubble_bound,
    format_bound_suite,
    mc_estimate,
    normal_cdf,
)
from treegen import chain_tree, random_martingale_tree

mpmath.mp.dps = 40

CDF_ABS_TOL = 1e-12


def _phi_ref(x: float) -> float:
    return float(mpmath.ncdf(x))


def test_normal_cdf_against_high_precision():
    for x in (-6.0, -2.5, -1.0, -0.3, 0.0, 0.3, 1.0, 2.5, 6.0):
        assert abs(normal_cdf(x) - _phi_ref(x)) <= CDF_ABS_TOL


def test_normal_cdf_symmetry():
    assert normal_cdf(0.0) == 0.5
    for x in (0.1, 0.7, 1.3, 4.0):
        assert abs(normal_cdf(x) + normal_cdf(-x) - 1.0) <= 1e-15


def test_bessel_mean_values():
    ref1 = float(2 * mpmath.ncdf(1) - 1)
    assert abs(bessel_mean(1.0) - ref1) <= CDF_ABS_TOL
    assert abs(bessel_mean(1.0) - 0.682689) <= 1e-6
    ref4 = float(2 * mpmath.ncdf(mpmath.mpf(1) / 2) - 1)
    assert abs(bessel_mean(4.0) - ref4) <= CDF_ABS_TOL
    assert abs(bessel_mean(4.0) - 0.382925) <= 1e-6
    assert abs(bessel_mean(1e-12) - 1.0) <= 1e-15


def test_bessel_mean_monotone_decreasing():
    grid = [0.25, 0.5, 1.0, 2.0, 4.0, 16.0]
    values = [bessel_mean(t) for t in grid]
    assert all(a > b for a, b in zip(values, values[1:]))
    with pytest.raises(BadConfig):
        bessel_mean(0.0)


def test_bessel_delta_values_and_identity():
    ref = float(2 * mpmath.mpf("1.05") * (1 - mpmath.ncdf(1)))
    assert abs(bessel_delta(0.05, 1.0) - ref) <= CDF_ABS_TOL
    assert abs(bessel_delta(0.05, 1.0) - 0.333176) <= 1e-6
    for lam, t in ((0.05, 1.0), (0.3, 4.0), (0.01, 0.5)):
        lhs = bessel_delta(lam, t)
        rhs = (1.0 + lam) * (1.0 - bessel_mean(t))
        assert abs(lhs - rhs) <= 1e-15
    # long horizons leak everything: the gap approaches the full ask
    assert abs(bessel_delta(0.05, 1e12) - 1.05) <= 1e-5
    assert bessel_delta(TransactionCost("1/20"), 1.0) == bessel_delta(0.05, 1.0)


def test_bubble_birth_closed_forms():
    tc = TransactionCost("1/10")
    s = Rat(5, 4)
    assert bubble_birth_fundamental(s, tc, Rat(1, 2), Rat(1, 4)) == Rat(11, 8)
    assert bubble_birth_bubble(s, tc, Rat(1, 2), Rat(1, 4)) == 0
    assert bubble_birth_fundamental(s, tc, Rat(1, 2), Rat(3, 4)) == 0
    assert bubble_birth_bubble(s, tc, Rat(1, 2), Rat(3, 4)) == Rat(11, 8)
    with pytest.raises(BadConfig):
        bubble_birth_fundamental(s, tc, Rat(1, 2), 1.0)
    with pytest.raises(BadConfig):
        bubble_birth_fundamental(Rat(0), tc, Rat(1, 2), Rat(1, 4))


def test_bubble_birth_frictionless_collapse_and_gap_identity():
    """With lam = 0 the bubble equals the frictionless one; for lam > 0 the
    excess over the frictionless bubble is exactly lam times it, on gamma <= t."""
    s, gamma, t = Rat(7, 3), Rat(1, 3), Rat(2, 3)
    beta_notc = bubble_birth_bubble(s, Rat(0), gamma, t)
    assert beta_notc == s
    for lam in (Rat(1, 10), Rat(1, 4), Rat(3, 5)):
        beta = bubble_birth_bubble(s, lam, gamma, t)
        assert beta - beta_notc == lam * beta_notc


def test_fbm_bubble_bound_exact_and_float():
    out = fbm_bubble_bound(TransactionCost(Rat(1, 5)))
    assert out["bound"] == Rat(3, 5)
    assert out["has_nonlocal_cps"] is False
    assert fbm_bubble_bound(0.2)["bound"] == 0.6
    assert fbm_bubble_bound(0.4)["bound"] == 0.0
    assert fbm_bubble_bound(Rat(1, 3))["bound"] == 0
    assert abs(fbm_bubble_bound(1e-9)["bound"] - 0.5) <= 1e-9


def test_mc_estimate_basics():
    est = mc_estimate([2.0, 2.0, 2.0, 2.0])
    assert est.mean == 2.0
    assert est.std_error == 0.0
    assert est.ci_halfwidth == 0.0
    assert est.covers(2.0)
    with pytest.raises(EmptySample):
        mc_estimate([])


def test_mc_estimate_covers_standard_normal_mean():
    rng = np.random.default_rng(5)
    est = mc_estimate(rng.standard_normal(50_000))
    assert est.n == 50_000
    assert est.multiplier == 3
    assert est.covers(0.0)
    assert est.ci_halfwidth == 3 * est.std_error


def test_estimate_ci_multiplier():
    est = EstimateCI(mean=1.0, std_error=0.1, n=100, multiplier=2)
    assert est.ci_halfwidth == 0.2
    assert est.covers(1.19)
    assert not est.covers(1.21)


def test_bound_suite_martingale_report_all_pass():
    tree = random_martingale_tree(random.Random(301), max_depth=3)
    tc = TransactionCost("1/10")
    report = bubble_report(tree, tc)
    checks = bound_suite(report, tc)
    names = {c.name for c in checks}
    assert names == {
        "beta_nonnegative", "fundamental_below_ask", "bubble_factor_bound",
        "gap_lower", "gap_upper", "delta_identity", "delta_lower", "delta_upper",
    }
    assert all(c.passed for c in checks)
    for c in checks:
        assert c.margin == 0 if c.kind == "identity" else c.margin >= 0


def test_bound_suite_without_frictionless_columns():
    report = bubble_report(chain_tree(), TransactionCost("1/2"))
    checks = bound_suite(report, TransactionCost("1/2"))
    assert {c.name for c in checks} == {"beta_nonnegative", "fundamental_below_ask"}
    assert all(c.passed for c in checks)


def test_bound_suite_flags_tampered_report():
    tree = random_martingale_tree(random.Random(302), max_depth=2)
    tc = TransactionCost("1/10")
    report = bubble_report(tree, tc)
    report.beta[0] = Rat(-1)
    checks = {c.name: c for c in bound_suite(report, tc)}
    assert not checks["beta_nonnegative"].passed
    assert checks["beta_nonnegative"].margin == Rat(-1)
    assert checks["beta_nonnegative"].node == 0
    assert not checks["delta_identity"].passed


def test_format_bound_suite_renders_status():
    report = bubble_report(chain_tree(), TransactionCost("1/2"))
    text = format_bound_suite(bound_suite(report, TransactionCost("1/2")))
    assert "beta_nonnegative" in text
    assert "pass" in text
