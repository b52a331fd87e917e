import numpy as np
import pytest
from numpy.testing import assert_allclose

from edgeburst import (ModelParams, b_sites, bloch_damping, bloch_hamiltonian,
                       damping_matrix, flat_index, gain_matrix,
                       hermitian_hamiltonian, real_space_hamiltonian, site_of,
                       stability_check)
from edgeburst.errors import ConfigError


def test_bloch_at_k0_matches_direct_substitution():
    p = ModelParams(t1=0.8, t2=1.0, gamma1=0.8, L=2)
    H = bloch_hamiltonian(p, 0.0)
    assert_allclose(H, np.array([[0.0, 1.8], [1.8, -0.8j]]), atol=1e-15)


def test_bloch_decoupling_momentum_kills_offdiagonal():
    p = ModelParams(t1=0.5, t2=1.0, gamma1=0.8, L=2)
    k0 = np.arccos(-p.t1 / p.t2)
    H = bloch_hamiltonian(p, k0)
    assert abs(H[0, 1]) < 1e-15
    assert abs(H[1, 0]) < 1e-15


@pytest.mark.parametrize("k", [0.0, 0.7, 2.1, -1.3])
def test_bloch_hermitian_part_is_lossless(k):
    p = ModelParams(t1=0.8, t2=1.0, gamma1=0.8, L=2)
    H = bloch_hamiltonian(p, k)
    herm = 0.5 * (H + H.conj().T)
    sx = np.array([[0, 1], [1, 0]])
    sz = np.array([[1, 0], [0, -1]])
    expected = (p.t1 + p.t2 * np.cos(k)) * sx + p.t2 * np.sin(k) * sz
    assert_allclose(herm, expected, atol=1e-15)


def test_flat_index_round_trip():
    for cell in range(1, 9):
        for s in "AB":
            assert site_of(flat_index(cell, s)) == (cell, s)
    assert flat_index(50, "A") == 98
    assert flat_index(1, "B") == 1


def test_real_space_obc_truncates_at_ends():
    p = ModelParams(t1=0.3, t2=1.1, gamma1=0.2, L=2)
    H = real_space_hamiltonian(p)
    # only cells 1<->2 are linked; no wrap blocks
    assert H.shape == (4, 4)
    assert H[0, 2] != 0 or H[0, 3] != 0
    hpbc = real_space_hamiltonian(p.replace(bc="PBC", L=3))
    assert np.any(hpbc[0:2, 4:6] != 0)


def test_pbc_spectrum_is_union_of_bloch_spectra():
    p = ModelParams(t1=0.8, t2=1.0, gamma1=0.8, L=12, bc="PBC")
    H = real_space_hamiltonian(p)
    ev_real = np.linalg.eigvals(H)
    ev_bloch = np.concatenate([
        np.linalg.eigvals(bloch_hamiltonian(p, 2 * np.pi * n / p.L))
        for n in range(p.L)])
    dist = np.abs(ev_bloch[:, None] - ev_real[None, :]).min(axis=1)
    assert dist.max() < 1e-10


def test_hermitian_part_is_hermitian_and_matches_structure():
    p = ModelParams(t1=0.4, t2=0.9, gamma1=0.5, L=5)
    H0 = hermitian_hamiltonian(p)
    assert_allclose(H0, H0.conj().T, atol=0)
    # intracell hopping t1, intercell t2/2 blocks
    assert H0[0, 1] == p.t1
    assert H0[0, 3] == 0.5 * p.t2
    assert H0[2, 0] == 0.5j * p.t2


def test_balanced_damping_equals_i_H_conj(fig1_params):
    X = damping_matrix(fig1_params)
    H = real_space_hamiltonian(fig1_params)
    assert np.abs(X - 1j * H.conj()).max() < 1e-14


def test_imbalance_shifts_single_entry(fig1_params):
    dg = 0.3
    p2 = fig1_params.replace(gamma_g=fig1_params.gamma_g + dg)
    d = damping_matrix(p2) - damping_matrix(fig1_params)
    idx = flat_index(fig1_params.x0, "A")
    assert d[idx, idx] == pytest.approx(dg, abs=1e-15)
    d[idx, idx] = 0
    assert np.abs(d).max() == 0


def test_gain_matrix_single_entry_psd():
    p = ModelParams(t1=0.8, t2=1.0, gamma1=0.8, gamma_g=0.8, L=60, x0=50)
    M = gain_matrix(p)
    assert M[98, 98] == 0.8
    assert np.count_nonzero(M) == 1
    assert np.trace(M).real == pytest.approx(0.8)
    assert np.linalg.eigvalsh(M).min() >= 0


def test_fermionic_damping_structure():
    p = ModelParams(t1=0.6, t2=1.0, gamma1=0.4, gamma_g=0.7, gamma_l=0.3,
                    L=8, x0=4, statistics="Fermionic")
    XF = damping_matrix(p)
    Xb = 1j * real_space_hamiltonian(p.replace(statistics="Bosonic")).conj()
    idx = flat_index(p.x0, "A")
    diff = XF - Xb
    assert diff[idx, idx] == pytest.approx(-(p.gamma_g + p.gamma_l), abs=1e-14)
    diff[idx, idx] = 0
    assert np.abs(diff).max() < 1e-14


def test_fermionic_damping_always_stable(rng):
    """Numerical eigensolve over random parameter draws (0 < t1 <= t2)."""
    worst = -np.inf
    for _ in range(100):
        t2 = rng.uniform(0.2, 2.0)
        p = ModelParams(t1=rng.uniform(0.01, 1.0) * t2, t2=t2,
                        gamma1=rng.uniform(0.0, 2.0),
                        gamma_g=rng.uniform(0.0, 2.0),
                        gamma_l=rng.uniform(0.0, 2.0),
                        L=int(rng.integers(5, 30)), x0=1,
                        statistics="Fermionic")
        p = p.replace(x0=int(rng.integers(1, p.L + 1)))
        worst = max(worst, stability_check(damping_matrix(p)).max_real)
    assert worst <= 1e-9


def test_stability_check_classifications(fig2_params):
    rep = stability_check(damping_matrix(fig2_params.replace(bc="PBC")))
    assert rep.classification == "marginal"
    assert abs(rep.max_real) <= 1e-9

    rep = stability_check(-np.eye(4))
    assert rep.classification == "stable"
    assert rep.max_real == pytest.approx(-1.0)

    # imbalance past threshold destabilizes under OBC
    p = fig2_params.replace(gamma_g=0.8 + 0.7, gamma_l=0.8)  # dg=0.7 > 9/13
    rep = stability_check(damping_matrix(p))
    assert rep.classification == "unstable"


def test_params_json_round_trip(fig1_params):
    d = fig1_params.to_dict()
    assert ModelParams.from_dict(d) == fig1_params
    with pytest.raises(ConfigError):
        ModelParams.from_dict({**d, "t3": 1.0})


@pytest.mark.parametrize("bad", [
    {"t1": 0.5, "t2": 0.0},
    {"t1": 0.5, "t2": 1.0, "gamma1": -0.1},
    {"t1": 0.5, "t2": 1.0, "L": 4, "x0": 5},
    {"t1": 0.5, "t2": 1.0, "bc": "open"},
    {"t1": 0.5, "t2": 1.0, "statistics": "boson"},
])
def test_params_validation(bad):
    with pytest.raises(ConfigError):
        ModelParams.from_dict(bad)


def test_gapless_flag():
    assert ModelParams(t1=0.5, t2=1.0).gapless
    assert ModelParams(t1=1.0, t2=1.0).gapless
    assert not ModelParams(t1=1.2, t2=1.0).gapless
    assert not ModelParams(t1=-0.5, t2=1.0).gapless


def test_bloch_damping_spectrum_matches_iHstar_over_grid():
    """X(k) and i*conj(H(k)) differ by k -> -k; spectra over the grid agree."""
    p = ModelParams(t1=0.5, t2=1.0, gamma1=0.8, L=2)
    ks = 2 * np.pi * np.arange(24) / 24
    ev1 = np.sort_complex(np.concatenate(
        [np.linalg.eigvals(bloch_damping(p, k)) for k in ks]))
    ev2 = np.sort_complex(np.concatenate(
        [np.linalg.eigvals(1j * bloch_hamiltonian(p, k).conj()) for k in ks]))
    dist = np.abs(ev1[:, None] - ev2[None, :]).min(axis=1)
    assert dist.max() < 1e-12
