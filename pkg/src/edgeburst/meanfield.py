"""Mean-field treatment of two-body loss: the density-dependent damping
matrix and the nonlinear correlator evolution it generates.

Two-body loss is mimicked by a local single-body loss whose rate tracks the
instantaneous B-site density, 2 gamma2 n_B(x,t).  That closes the correlator
hierarchy into a nonlinear flow

    d Delta/dt = X_MF(Delta) Delta + Delta X_MF(Delta)^dag + 2 M(g),

whose steady state carries the sum rule sum_x n_B(x)^2 = gamma_g/(2 gamma2)
and the analytic decay exponents returned by ``meanfield_exponents``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Blowup, ConfigError, NegativeDensity, NotConverged, NotGapless
from .model import ModelParams, b_sites, damping_matrix, gain_matrix

NEGATIVE_DENSITY_TOL = 1e-10


@dataclass
class MeanFieldState:
    delta: np.ndarray
    time: float
    residual: float

    @property
    def n_B(self) -> np.ndarray:
        return np.real(np.diag(self.delta)[1::2].copy())


def _base_damping(params: ModelParams) -> np.ndarray:
    if params.gamma_g != params.gamma_l:
        raise ConfigError("mean-field evolution requires balanced pumping")
    return damping_matrix(params)


def meanfield_damping(params: ModelParams, delta: np.ndarray) -> np.ndarray:
    """Damping matrix with the B-site loss replaced by -2 gamma2 n_B(x).

    Densities in [-1e-10, 0] are clamped to zero (solver noise); anything
    more negative is a genuine instability and raises.
    """
    X = _base_damping(params)
    bs = b_sites(params.L)
    nB = np.real(np.diagonal(delta)[bs])
    if np.any(nB < -NEGATIVE_DENSITY_TOL):
        raise NegativeDensity(f"min B density {nB.min():.3e}")
    nB = np.maximum(nB, 0.0)
    X[bs, bs] = -2.0 * params.gamma2 * nB   # replaces the -gamma1 entries
    return X


def _integrate_to_steady(F, y0: np.ndarray, dt: float, src_norm: float,
                         t_max: float, res_tol: float, blowup: float = 1e8,
                         err_tol: float = 1e-6, check_every: int = 64,
                         record_times=()):
    """Stage-refreshed RK4 until ||F(y)|| / src_norm < res_tol.

    dt halves whenever a step-doubling error estimate (run every
    check_every steps) exceeds err_tol.  Returns (y, t, residual, history).
    """
    y = y0
    t = 0.0
    i = 0
    record_times = sorted(record_times)
    next_rec = 0
    history = []

    def rk4(y, h):
        k1 = F(y)
        k2 = F(y + 0.5 * h * k1)
        k3 = F(y + 0.5 * h * k2)
        k4 = F(y + h * k3)
        return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    while t < t_max:
        if i % check_every == 0:
            full = rk4(y, dt)
            half = rk4(rk4(y, 0.5 * dt), 0.5 * dt)
            if np.linalg.norm(full - half) > err_tol:
                dt *= 0.5
                continue
            y = half
        else:
            y = rk4(y, dt)
        t += dt
        i += 1
        while next_rec < len(record_times) and t >= record_times[next_rec]:
            history.append((t, y.copy()))
            next_rec += 1
        if i % 16 == 0:
            nrm = np.linalg.norm(y)
            if not np.isfinite(nrm) or nrm > blowup:
                raise Blowup(f"state norm {nrm:.2e} at t={t:.1f}")
            if np.linalg.norm(F(y)) / src_norm < res_tol:
                return y, t, float(np.linalg.norm(F(y)) / src_norm), history
    resid = float(np.linalg.norm(F(y)) / src_norm)
    if resid >= res_tol:
        raise NotConverged(f"residual {resid:.2e} > {res_tol} at t_max={t_max}")
    return y, t, resid, history


def evolve_meanfield(params: ModelParams, t_max: float = 5000.0,
                     dt: float | None = None, res_tol: float = 1e-8,
                     record_times=()) -> MeanFieldState:
    """Integrate the nonlinear correlator flow from Delta(0) = 0 to steady state.

    X_MF is rebuilt from the live Delta at every RK4 stage.  The default
    initial step resolves the pump-dominated early dynamics: the B-site loss
    starts at zero, so the rate scale uses a floor density gamma_g/(2 gamma2 L)
    spread over the chain.
    """
    if params.gamma2 <= 0:
        raise ConfigError("mean-field evolution needs gamma2 > 0")
    N = params.dim
    Mg2 = 2.0 * gain_matrix(params).real
    src_norm = float(np.linalg.norm(Mg2))
    base = _base_damping(params)
    bs = b_sites(params.L)
    g2 = params.gamma2

    if dt is None:
        floor = 2.0 * g2 * np.sqrt(params.gamma_g / (2.0 * g2 * params.L))
        X0 = base.copy()
        X0[bs, bs] = -floor
        rho = float(np.abs(np.linalg.eigvals(X0)).max())
        dt = 0.1 / rho

    def F(D):
        nB = np.maximum(np.real(np.diagonal(D)[bs]), 0.0)
        X = base.copy()
        X[bs, bs] = -2.0 * g2 * nB
        dD = X @ D + D @ X.conj().T + Mg2
        return 0.5 * (dD + dD.conj().T)

    D0 = np.zeros((N, N), dtype=complex)
    D, t, resid, hist = _integrate_to_steady(F, D0, dt, src_norm, t_max, res_tol,
                                             record_times=record_times)
    nB = np.real(np.diagonal(D)[bs])
    if np.any(nB < -NEGATIVE_DENSITY_TOL):
        raise NegativeDensity(f"min steady B density {nB.min():.3e}")
    state = MeanFieldState(0.5 * (D + D.conj().T), t, resid)
    state.history = [(ti, MeanFieldState(Di, ti, np.nan)) for ti, Di in hist]
    return state


def meanfield_exponents(params: ModelParams) -> dict:
    """Analytic mean-field decay exponents in the gapless regime.

    Self-consistency of n ~ n^-1.5 |x-x0|^-1.5 gives the bulk value 0.6;
    the sum rule plus boundary accumulation gives the edge value 0.1; the
    squared profile doubles both.
    """
    if not (0 < params.t1 < params.t2):
        raise NotGapless(f"need 0 < t1 < t2, got t1={params.t1}, t2={params.t2}")
    return {"bulk": 0.6, "edge": 0.1, "bulk_sq": 1.2, "edge_sq": 0.2}
