import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgeburst import (ScalingFit, edge_series, fit_bulk, fit_power_law,
                       has_edge_burst, scaling_report, select_bulk_window)
from edgeburst.errors import (InsufficientPoints, NonPositiveValue,
                              WindowTooSmall)


def synthetic_profile(L, x0, alpha=1.5, amp=7.0, edge=None):
    """Power-law decay toward the left of the pump, tiny tail to its right."""
    x = np.arange(1, L + 1)
    dist = np.abs(x - x0).astype(float)
    dist[x0 - 1] = 1.0
    v = np.where(x < x0, amp * dist ** -alpha, 1e-12)
    v[x0 - 1] = amp
    if edge is not None:
        v[0] = edge
    return v


def test_exact_power_law_recovered():
    d = np.arange(2.0, 41.0)
    fit = fit_power_law(d, 7.0 * d ** -1.5)
    assert fit.exponent == pytest.approx(1.5, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(7.0), abs=1e-12)
    assert fit.stderr < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=1e-6, max_value=1e6))
def test_exponent_invariant_under_rescaling(scale):
    """Profiles changed by an x-independent factor keep their exponent."""
    d = np.arange(3.0, 30.0)
    v = 2.5 * d ** -0.7
    f1 = fit_power_law(d, v)
    f2 = fit_power_law(d, scale * v)
    assert abs(f1.exponent - f2.exponent) < 1e-12


def test_weighted_fit_uses_inverse_variance():
    rng = np.random.default_rng(5)
    d = np.arange(2.0, 60.0)
    v = 4.0 * d ** -1.2
    sigma = 0.02 * v
    noisy = v * (1 + 0.02 * rng.standard_normal(d.size))
    fit = fit_power_law(d, noisy, sigma=sigma)
    assert fit.exponent == pytest.approx(1.2, abs=0.05)


def test_fit_rejects_bad_input():
    with pytest.raises(InsufficientPoints):
        fit_power_law([1, 2, 3], [1, 2, 3])
    with pytest.raises(NonPositiveValue):
        fit_power_law(np.arange(1.0, 9.0), np.array([1, 1, 1, -2, 1, 1, 1, 1.0]))
    with pytest.raises(NonPositiveValue):
        fit_power_law(np.array([0, 1, 2, 3, 4, 5.0]) , np.ones(6))


def test_window_rule_basic():
    prof = synthetic_profile(60, 50)
    lo, hi = select_bulk_window(prof, 50)
    assert lo >= 10 and hi == 45

    prof = synthetic_profile(500, 450)
    lo, hi = select_bulk_window(prof, 450)
    assert (lo, hi) == (10, 445)
    assert hi - lo + 1 >= 100


def test_window_too_small_near_edge():
    prof = synthetic_profile(60, 12)
    with pytest.raises(WindowTooSmall):
        select_bulk_window(prof, 12)


def test_window_shrinks_past_edge_tail():
    """A burst tail that decays through x=14 must be excluded."""
    prof = synthetic_profile(50, 45)
    x = np.arange(1, 15)
    prof[:14] += 30.0 * np.exp(-x / 4.0)
    lo, hi = select_bulk_window(prof, 45)
    assert lo >= 13
    assert hi == 40


def test_window_slack_tolerates_noise():
    rng = np.random.default_rng(2)
    prof = synthetic_profile(60, 50)
    sigma = 0.05 * prof
    prof = prof * (1 + 0.03 * rng.standard_normal(60))
    lo, hi = select_bulk_window(prof, 50, sigma=sigma)
    assert hi - lo + 1 >= 6


def test_fit_bulk_on_synthetic():
    prof = synthetic_profile(200, 150, alpha=1.5)
    fit = fit_bulk(prof, 150)
    assert fit.exponent == pytest.approx(1.5, abs=1e-10)
    assert fit.window[1] == 145


def test_edge_series_and_report():
    profiles = {}
    for x0 in (50, 100, 150, 200, 250, 300, 350, 400, 450):
        prof = synthetic_profile(500, x0, alpha=1.5)
        prof[0] = 2.0 * (x0 - 1.0) ** -0.5
        profiles[x0] = prof
    d, v = edge_series(profiles)
    assert d[0] == 49.0 and v[0] == profiles[50][0]

    report = scaling_report(profiles,
                            constraints={"total": (1.0, 1.0, 1e-6)})
    assert report["alpha_b"] == pytest.approx(1.5, abs=1e-6)
    assert report["alpha_e"] == pytest.approx(0.5, abs=1e-6)
    assert report["difference"] == pytest.approx(1.0, abs=1e-6)
    assert report["constraint_checks"]["total"]["ok"]


def test_edge_burst_detector_fires_and_abstains():
    # burst: edge value far above the bulk extrapolation
    prof = synthetic_profile(60, 50, alpha=1.5)
    pred = 7.0 * 49.0 ** -1.5
    prof[0] = 10.0 * pred
    prof[1] = 0.5 * prof[0]
    assert has_edge_burst(prof, 50)

    # no burst: profile follows the power law all the way to the edge
    prof2 = synthetic_profile(60, 50, alpha=1.5)
    prof2[0] = pred
    assert not has_edge_burst(prof2, 50)

    # gapped-style exponential decay, no edge peak at all
    x = np.arange(1, 61.0)
    prof3 = np.exp(-np.abs(x - 50) / 2.0) + 1e-15
    assert not has_edge_burst(prof3, 50)


def test_value_at_extrapolation():
    fit = ScalingFit(exponent=1.5, intercept=np.log(7.0), window=None,
                     r_squared=1.0, stderr=0.0)
    assert fit.value_at(49.0) == pytest.approx(7.0 * 49 ** -1.5)
