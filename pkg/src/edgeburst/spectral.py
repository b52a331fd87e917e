"""Analytic and semianalytic spectral layer.

Everything here works at the level of the momentum-space damping matrix
X(k) and its non-Bloch continuation X(beta), beta = e^{ik}: dissipative
spectra, spatial-decay roots beta_L / beta_R, the reference circle
separating them, expansion coefficients around the gap-closing frequency,
the on-site resolvent element at the pump site, and the critical
gain-loss imbalance.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DegenerateRoots, NotGapless, PoleOnContour, Resonance
from .model import ModelParams, bloch_damping

DEGENERACY_TOL = 1e-12


class BetaPair(NamedTuple):
    """Roots of det[i omega - X(beta)] = 0, labeled |beta_R| <= |beta_L|."""
    beta_L: complex
    beta_R: complex
    omega: float


class SpectrumResult(NamedTuple):
    k: np.ndarray            # momentum grid
    eigenvalues: np.ndarray  # shape (nk, 2)
    max_real: float          # refined over continuous k
    gapless: bool


def _quadratic_coeffs(params: ModelParams, omega: float):
    """det[i*omega - X(beta)] * beta = a*beta^2 + b*beta + c."""
    t1, t2, g1 = params.t1, params.t2, params.gamma1
    a = t2 * (t1 + 0.5 * g1)
    b = t1**2 + t2**2 - omega**2 + 1j * omega * g1
    c = t2 * (t1 - 0.5 * g1)
    return a, b, c


def beta_roots(params: ModelParams, omega: float) -> BetaPair:
    """Spatial-decay roots at real frequency omega.

    Solved in closed form from the quadratic in beta so the branch labeling
    is exact: |beta_R| <= |beta_L|, with the circle of radius gbz_radius
    separating them whenever they are nondegenerate.
    """
    a, b, c = _quadratic_coeffs(params, omega)
    disc = np.sqrt(b * b - 4 * a * c + 0j)
    r1 = (-b + disc) / (2 * a)
    r2 = (-b - disc) / (2 * a)
    if abs(r1) < abs(r2):
        r1, r2 = r2, r1
    if abs(r1) - abs(r2) < DEGENERACY_TOL:
        raise DegenerateRoots(
            f"|beta_L| - |beta_R| = {abs(r1) - abs(r2):.2e} at omega={omega}")
    return BetaPair(complex(r1), complex(r2), float(omega))


def gbz_radius(params: ModelParams) -> float:
    """Radius sqrt|(t1 - gamma1/2) / (t1 + gamma1/2)| of the separating circle."""
    t1, g1 = params.t1, params.gamma1
    denom = t1 + 0.5 * g1
    if denom == 0:
        raise ZeroDivisionError("t1 + gamma1/2 must be nonzero")
    return float(np.sqrt(abs((t1 - 0.5 * g1) / denom)))


def pbc_spectrum(params: ModelParams, nk: int = 2001) -> SpectrumResult:
    """Damping-matrix eigenvalues over a uniform momentum grid.

    The reported max_real is refined off-grid (bounded scalar minimization
    around the best grid point), so the gapless flag does not depend on the
    grid hitting the decoupling momentum exactly.
    """
    if nk < 2:
        raise ValueError("nk must be >= 2")
    ks = np.linspace(0.0, 2 * np.pi, nk, endpoint=False)
    evs = np.empty((nk, 2), dtype=complex)
    for i, k in enumerate(ks):
        evs[i] = np.linalg.eigvals(bloch_damping(params, k))
    reals = evs.real.max(axis=1)
    i0 = int(np.argmax(reals))
    dk = ks[1] - ks[0]

    def neg_max_re(k):
        return -np.linalg.eigvals(bloch_damping(params, k)).real.max()

    res = minimize_scalar(neg_max_re, bounds=(ks[i0] - dk, ks[i0] + dk),
                          method="bounded", options={"xatol": 1e-10})
    max_real = float(-res.fun)
    return SpectrumResult(ks, evs, max_real, abs(max_real) <= 1e-9)


def gap_closing_frequency(params: ModelParams) -> float:
    """omega0 = sqrt(t2^2 - t1^2), the frequency of the spectral touching points."""
    if not (0 < params.t1 < params.t2):
        raise NotGapless(f"need 0 < t1 < t2, got t1={params.t1}, t2={params.t2}")
    return float(np.sqrt(params.t2**2 - params.t1**2))


def expansion_coefficients(params: ModelParams) -> dict:
    """Leading-order expansion data around omega0.

    K is the curvature of ln|beta_L| in the detuning, f_L_slope the linear
    coefficient of the left residue factor:
        ln|beta_L(omega0 + dw)| ~ K dw^2,    f_L(omega0 + dw) ~ f_L_slope * dw.
    """
    t1, t2, g1 = params.t1, params.t2, params.gamma1
    w0 = gap_closing_frequency(params)
    K = g1 * (t2**2 - t1**2) / (t1**3 * (4 * t2**2 - 4 * t1**2 + g1**2))
    f_L_slope = -w0 / (t1**2 * (2 * w0 - 1j * g1))
    return {"omega0": w0, "K": float(K), "f_L_slope": complex(f_L_slope)}


def residue_coefficient(params: ModelParams, omega: float, side: str = "L") -> complex:
    """Residue factor f_L or f_R controlling the resolvent's spatial decay.

    f_s(omega) = lim_{beta -> beta_s} (beta - beta_s) * (BA element of
    (i omega - X(beta))^-1) / beta, evaluated from the closed-form roots.
    """
    if side not in ("L", "R"):
        raise ValueError("side must be 'L' or 'R'")
    t1, t2 = params.t1, params.t2
    a, _, _ = _quadratic_coeffs(params, omega)
    bl, br, _ = beta_roots(params, omega)
    b_here, b_other = (bl, br) if side == "L" else (br, bl)
    return 1j * (t1 + 0.5 * t2 * (b_here + 1 / b_here)) / (a * (b_here - b_other))


def onsite_greens_AA(params: ModelParams, omega: float) -> complex:
    """Pump-site resolvent element <x0A| (i omega - X)^-1 |x0A> for a bulk site.

    Closed form from the two poles (beta = 0 and beta = beta_R) inside the
    separating circle; valid when the pump sits far from both edges.
    """
    t1, t2, g1 = params.t1, params.t2, params.gamma1
    bl, br, _ = beta_roots(params, omega)
    r = gbz_radius(params)
    if abs(abs(bl) - r) < DEGENERACY_TOL or abs(abs(br) - r) < DEGENERACY_TOL:
        raise PoleOnContour(f"decay root on the separating circle at omega={omega}")
    first = (1j * omega - 0.5 * t2 * (br - 1 / br) + g1) / (t2 * (t1 + 0.5 * g1) * (br - bl))
    return complex(first + 1 / (2 * t1 - g1))


def critical_imbalance(params: ModelParams) -> float:
    """Largest stable gain-loss imbalance: dg_c = t1 (2 t1 + gamma1) / (t1 + gamma1).

    Equals 1 / onsite_greens_AA(omega0); beyond it the pump-site impurity
    mode crosses into the right half plane and no steady state exists.
    """
    if not (0 < params.t1 < params.t2):
        raise NotGapless(f"need 0 < t1 < t2, got t1={params.t1}, t2={params.t2}")
    t1, g1 = params.t1, params.gamma1
    return float(t1 * (2 * t1 + g1) / (t1 + g1))


def impurity_factor(params: ModelParams, delta_gamma: float, omega: float) -> complex:
    """Imbalance dressing factor N(omega) = 1 / (1 - dg * G_AA(omega)).

    Multiplies every resolvent element out of the pump site; independent of
    position, which is why imbalance rescales profiles without changing
    their decay exponents.
    """
    g = onsite_greens_AA(params, omega)
    denom = 1 - delta_gamma * g
    if abs(denom) < 1e-10:
        raise Resonance(f"1 - dg*G_AA = {denom:.2e} at omega={omega}")
    return complex(1 / denom)


def beta_scan(params: ModelParams, n: int = 2001) -> dict:
    """Moduli of both decay roots over a frequency window.

    The window is [-W, W] with W = 2(|t1| + |t2| + gamma1 + 1), wide enough
    that both curves have passed their extrema.
    """
    W = 2 * (abs(params.t1) + abs(params.t2) + params.gamma1 + 1.0)
    omegas = np.linspace(-W, W, n)
    mod_L = np.empty(n)
    mod_R = np.empty(n)
    for i, w in enumerate(omegas):
        bl, br, _ = beta_roots(params, w)
        mod_L[i] = abs(bl)
        mod_R[i] = abs(br)
    return {"omega": omegas, "abs_beta_L": mod_L, "abs_beta_R": mod_R}
