import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from edgeburst import (ModelParams, beta_roots, beta_scan, critical_imbalance,
                       damping_matrix, expansion_coefficients, flat_index,
                       gap_closing_frequency, gbz_radius, impurity_factor,
                       onsite_greens_AA, pbc_spectrum, residue_coefficient)
from edgeburst.errors import NotGapless, Resonance

P = ModelParams(t1=0.5, t2=1.0, gamma1=0.8, L=60, x0=50,
                gamma_g=0.8, gamma_l=0.8)
W0 = np.sqrt(1.0 - 0.25)


def test_pbc_spectrum_gapless_case():
    res = pbc_spectrum(P, nk=600)
    assert abs(res.max_real) <= 1e-9
    assert res.gapless
    # gapless eigenvalues +- i sqrt(t2^2 - t1^2) appear on the grid near k0
    target = np.array([1j * W0, -1j * W0])
    ev = res.eigenvalues.reshape(-1)
    for t in target:
        assert np.abs(ev - t).min() < 1e-2  # grid resolution
    # exactly at +-k0 one branch decouples onto the A chain: eigenvalue
    # -+ i t2 sin k0 with zero real part (the other keeps the full loss)
    from edgeburst import bloch_damping
    k0 = np.arccos(-P.t1 / P.t2)
    for k, lam in ((k0, -1j * W0), (-k0, 1j * W0)):
        ev0 = np.linalg.eigvals(bloch_damping(P, k))
        assert np.abs(ev0 - lam).min() < 1e-12


def test_pbc_spectrum_gapped_case():
    res = pbc_spectrum(P.replace(t1=1.2), nk=600)
    assert res.max_real < -1e-3
    assert not res.gapless


def test_beta_roots_closed_form_values():
    pair = beta_roots(P, W0)
    assert_allclose(pair.beta_L, -0.5 - 1j * W0, atol=1e-12)
    assert_allclose(pair.beta_R, (0.1 / 0.9) * (-0.5 + 1j * W0), atol=1e-12)
    assert abs(abs(pair.beta_L) - 1.0) < 1e-10
    assert abs(abs(pair.beta_L * pair.beta_R) - 1.0 / 9.0) < 1e-12


def test_gbz_radius_closed_form():
    assert gbz_radius(P) == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert gbz_radius(P.replace(gamma1=0.0)) == pytest.approx(1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=-8.0, max_value=8.0))
def test_root_product_identity(omega):
    """|beta_L beta_R| equals the separating-circle radius squared for all
    real frequencies."""
    pair = beta_roots(P, omega)
    assert abs(abs(pair.beta_L * pair.beta_R) - gbz_radius(P) ** 2) < 1e-10


def test_beta_L_reaches_min_modulus_one_at_w0():
    scan = beta_scan(P, n=4001)
    assert scan["abs_beta_L"].min() >= 1.0 - 1e-9
    i = np.argmin(scan["abs_beta_L"])
    assert abs(abs(scan["omega"][i]) - W0) < 5e-3
    # right-side root peaks below one at the same frequencies
    j = np.argmax(scan["abs_beta_R"])
    assert scan["abs_beta_R"].max() < 1.0
    assert abs(abs(scan["omega"][j]) - W0) < 5e-3


def test_expansion_coefficients_values_and_finite_difference():
    exp = expansion_coefficients(P)
    assert exp["omega0"] == pytest.approx(W0, abs=1e-14)
    assert exp["K"] == pytest.approx(0.6 / 0.455, rel=1e-12)

    dw = 1e-3
    bl = beta_roots(P, W0 + dw).beta_L
    K_fd = np.log(abs(bl)) / dw**2
    assert K_fd == pytest.approx(exp["K"], rel=1e-3)

    dw = 1e-4
    fl = residue_coefficient(P, W0 + dw, side="L")
    assert abs(fl / dw - exp["f_L_slope"]) / abs(exp["f_L_slope"]) < 1e-3


def test_expansion_requires_gapless():
    with pytest.raises(NotGapless):
        expansion_coefficients(P.replace(t1=1.2))


def test_residue_vanishes_at_w0():
    assert abs(residue_coefficient(P, W0 + 1e-9, side="L")) < 1e-6


def test_onsite_greens_at_w0_closed_form():
    g = onsite_greens_AA(P, W0)
    assert g.real == pytest.approx(1.3 / 0.9, abs=1e-12)
    assert abs(g.imag) < 1e-10


def test_onsite_greens_derivative_matches_K1():
    K1 = P.gamma1 * W0 / (P.t1**3 * (P.gamma1 + 2j * W0))
    h = 1e-5
    fd = (onsite_greens_AA(P, W0 + h) - onsite_greens_AA(P, W0 - h)) / (2 * h)
    assert abs(fd - K1) / abs(K1) < 1e-4


def test_onsite_greens_matches_dense_resolvent():
    """Independent oracle: (x0A, x0A) entry of (i w - X)^-1 on a long chain."""
    p = P.replace(L=200, x0=100)
    X = damping_matrix(p)
    w = 0.3
    idx = flat_index(p.x0, "A")
    e = np.zeros(2 * p.L, dtype=complex)
    e[idx] = 1.0
    y = np.linalg.solve(1j * w * np.eye(2 * p.L) - X, e)
    assert abs(y[idx] - onsite_greens_AA(p, w)) < 1e-4


def test_critical_imbalance_closed_form():
    assert critical_imbalance(P) == pytest.approx(9.0 / 13.0, abs=1e-14)
    assert critical_imbalance(P.replace(gamma1=0.0)) == pytest.approx(2 * P.t1)
    with pytest.raises(NotGapless):
        critical_imbalance(P.replace(t1=1.2))


def test_impurity_factor():
    assert impurity_factor(P, 0.0, 0.37) == pytest.approx(1.0)
    n = impurity_factor(P, 0.2, W0)
    assert n.real == pytest.approx(1.0 / (1.0 - 0.2 * 13.0 / 9.0), rel=1e-10)
    with pytest.raises(Resonance):
        impurity_factor(P, 9.0 / 13.0, W0)
