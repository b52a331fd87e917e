"""Exact computations for the quadratic open chain.

Four mutually-validating routes to the same physics:

* ``quench_loss``              - time-domain single-particle quench, loss
                                 probability accumulated site by site;
* ``loss_probability_integral``- frequency integral of the resolvent of H;
* ``solve_lyapunov``           - algebraic steady state of the correlator flow;
* ``steady_density_integral``  - frequency integral of the resolvent of X;
* ``evolve_correlator``        - time integration of the correlator flow.

For balanced pumping these are related by n_B(x) = (gamma_g / gamma1) P_x.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import quad_vec

from .errors import (IllConditioned, NotConverged, QuadratureNotConverged,
                     StepTooLarge, UnstableDamping)
from .model import (ModelParams, damping_matrix, flat_index, gain_matrix,
                    real_space_hamiltonian, stability_check)

logger = logging.getLogger(__name__)

# marginal-pair handling in the eigenbasis kernel
MARGINAL_PAIR_TOL = 1e-10
MARGINAL_SOURCE_TOL = 1e-12

_BAND = 3  # chain couplings reach at most 3 flat indices away


@dataclass
class LossProfile:
    """Per-cell loss probabilities (or per-B-site densities) with metadata."""
    values: np.ndarray
    time: float = np.inf
    norm2: float = 0.0          # residual wavefunction norm (quench route)
    quad_error: float = 0.0     # quadrature error estimate (integral route)
    history: list = field(default_factory=list)   # optional (t, values) snapshots

    @property
    def total(self) -> float:
        return float(self.values.sum())


@dataclass
class CorrelatorState:
    """Two-point correlator Delta_ij = <b_i^dag b_j> at a given time."""
    delta: np.ndarray
    time: float
    residual: float = np.nan    # steady-state defect, set by the solvers

    @property
    def n_B(self) -> np.ndarray:
        """Real B-site densities, one per unit cell."""
        return np.real(np.diag(self.delta)[1::2].copy())

    @property
    def n_A(self) -> np.ndarray:
        return np.real(np.diag(self.delta)[0::2].copy())


def _banded(X: np.ndarray) -> np.ndarray:
    """solve_banded storage of a chain matrix (supports OBC bandwidth 3)."""
    N = X.shape[0]
    ab = np.zeros((2 * _BAND + 1, N), dtype=complex)
    for o in range(-_BAND, _BAND + 1):
        n = N - abs(o)
        if n > 0:
            start = max(0, o)
            ab[_BAND - o, start:start + n] = np.diagonal(X, offset=o)
    return ab


def _is_banded(X: np.ndarray) -> bool:
    N = X.shape[0]
    outside = np.triu(np.ones((N, N), dtype=bool), _BAND + 1) | \
        np.tril(np.ones((N, N), dtype=bool), -(_BAND + 1))
    return not np.any(X[outside])


def _breakpoints(params: ModelParams):
    if 0 < params.t1 < params.t2:
        w0 = float(np.sqrt(params.t2**2 - params.t1**2))
        return [-w0, w0]
    return None


def _resolvent_quadrature(A: np.ndarray, rhs: np.ndarray, params: ModelParams,
                          shift: complex, epsrel: float):
    """integral dw/pi of |B-site rows of (shift*w - A)^-1 rhs|^2.

    shift is 1 for the Hamiltonian resolvent (w - H) and 1j for the damping
    resolvent (i w - X).  Uses a banded LU per frequency when A is a chain
    matrix, one solve for all requested source columns.
    """
    N = A.shape[0]
    banded = _is_banded(A)
    ab0 = _banded(A) if banded else None
    I = np.eye(N, dtype=complex)

    if banded:
        def f(w):
            ab = -ab0.copy()
            ab[_BAND, :] += shift * w
            y = sla.solve_banded((_BAND, _BAND), ab, rhs)
            return np.abs(y[1::2, :]) ** 2
    else:
        def f(w):
            y = np.linalg.solve(shift * w * I - A, rhs)
            return np.abs(y[1::2, :]) ** 2

    res, err, info = quad_vec(f, -np.inf, np.inf, epsrel=epsrel, epsabs=1e-300,
                              points=_breakpoints(params), full_output=True)
    if not info.success:
        raise QuadratureNotConverged(
            f"frequency quadrature stalled: error estimate {err:.2e}")
    return res / np.pi, err / np.pi


def quench_loss(params: ModelParams, t_max: float = 4000.0, dt: float | None = None,
                norm_tol: float = 1e-6, record_times=()) -> LossProfile:
    """Evolve |psi(0)> = |x0 A> under i d psi/dt = H psi and accumulate the
    site-resolved loss P(x,t) = 2 gamma1 int_0^t |<xB|psi>|^2.

    Stops once the surviving norm <psi|psi> drops below norm_tol; raises
    NotConverged if that never happens before t_max.  RK4 on the state,
    trapezoid accumulation of the loss on the same grid.
    """
    if params.bc != "OBC":
        raise ValueError("quench_loss is defined for OBC chains")
    if params.gamma1 <= 0:
        raise ValueError("quench_loss requires gamma1 > 0")
    H = real_space_hamiltonian(params)
    A = -1j * H
    rho = float(np.abs(np.linalg.eigvals(H)).max())
    if dt is None:
        dt = 0.05 / rho   # trapezoid + RK4 amplitude errors stay below 1e-7
    if dt * rho >= 1.0:
        raise StepTooLarge(f"dt*rho = {dt * rho:.2f} >= 1")

    psi = np.zeros(params.dim, dtype=complex)
    psi[flat_index(params.x0, "A")] = 1.0
    P = np.zeros(params.L)
    two_g1 = 2.0 * params.gamma1
    f_prev = two_g1 * np.abs(psi[1::2]) ** 2
    record_times = sorted(record_times)
    next_rec = 0
    history = []

    n_steps = int(np.ceil(t_max / dt))
    t = 0.0
    norm2 = 1.0
    for i in range(n_steps):
        k1 = A @ psi
        k2 = A @ (psi + 0.5 * dt * k1)
        k3 = A @ (psi + 0.5 * dt * k2)
        k4 = A @ (psi + dt * k3)
        psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
        f = two_g1 * np.abs(psi[1::2]) ** 2
        P += 0.5 * dt * (f_prev + f)
        f_prev = f
        while next_rec < len(record_times) and t >= record_times[next_rec]:
            history.append((t, P.copy()))
            next_rec += 1
        if i % 10 == 0:
            norm2 = float(np.vdot(psi, psi).real)
            if norm2 < norm_tol:
                break
    norm2 = float(np.vdot(psi, psi).real)
    if norm2 > norm_tol:
        raise NotConverged(f"norm^2 = {norm2:.2e} > {norm_tol} at t_max={t_max}")
    return LossProfile(P, time=t, norm2=norm2, history=history)


def loss_probability_integral(params: ModelParams, epsrel: float = 1e-8) -> LossProfile:
    """Total loss probabilities from the frequency integral
    P_x = gamma1/pi * int dw |<xB| (w - H)^-1 |x0 A>|^2."""
    if params.bc != "OBC":
        raise ValueError("loss_probability_integral is defined for OBC chains")
    H = real_space_hamiltonian(params)
    rhs = np.zeros((params.dim, 1), dtype=complex)
    rhs[flat_index(params.x0, "A"), 0] = 1.0
    res, err = _resolvent_quadrature(H, rhs, params, shift=1.0, epsrel=epsrel)
    return LossProfile(params.gamma1 * res[:, 0], quad_error=params.gamma1 * err)


def lyapunov_residual(X: np.ndarray, Mg: np.ndarray, delta: np.ndarray) -> float:
    src = 2.0 * Mg
    return float(np.linalg.norm(X @ delta + delta @ X.conj().T + src)
                 / np.linalg.norm(src))


def _eigenbasis_solve(X, Mg):
    """Steady state via X = sum_n lambda_n |nR><nL| and the 1/(l_m + l_n^*) kernel.

    Returns (delta, had_marginal).  Marginal pairs with no projected source
    are dropped (exact for dark states that carry no gain); a driven marginal
    pair means no steady state exists.
    """
    lam, V = np.linalg.eig(X)
    Vi = np.linalg.inv(V)
    C = Vi @ Mg @ Vi.conj().T
    den = lam[:, None] + lam[None, :].conj()
    marginal = np.abs(den) < MARGINAL_PAIR_TOL
    if marginal.any():
        driven = marginal & (np.abs(C) > MARGINAL_SOURCE_TOL)
        if driven.any():
            raise IllConditioned(
                "gapless damping mode is driven by the gain source; "
                "no steady state exists")
        logger.info("dropping %d undriven marginal eigenpair term(s)", marginal.sum())
        den = np.where(marginal, 1.0, den)
        S = -2.0 * C / den
        S[marginal] = 0.0
    else:
        S = -2.0 * C / den
    return V @ S @ V.conj().T, bool(marginal.any())


def solve_lyapunov(X: np.ndarray, Mg: np.ndarray,
                   resid_tol: float = 1e-8) -> CorrelatorState:
    """Solve X Delta + Delta X^dag + 2 Mg = 0 for the steady-state correlator.

    The eigenbasis kernel is attempted first; it is exact for marginal
    (dark-state) spectra, where the eigenvectors are well conditioned.  For
    strongly skin-localized OBC chains the eigenbasis is numerically
    degenerate (condition numbers grow exponentially with L), so the solve
    falls back to a Schur-based Lyapunov solver and the residual is verified
    either way.
    """
    rep = stability_check(X)
    if rep.classification == "unstable":
        raise UnstableDamping(f"max Re eig = {rep.max_real:.3e} > 0")

    delta = None
    try:
        cand, had_marginal = _eigenbasis_solve(X, Mg)
        if lyapunov_residual(X, Mg, cand) <= resid_tol:
            delta = cand
        elif had_marginal:
            raise IllConditioned(
                "marginal spectrum but eigenbasis solve missed the residual target")
    except IllConditioned:
        raise
    except np.linalg.LinAlgError:
        pass

    if delta is None:
        delta = sla.solve_continuous_lyapunov(X, -2.0 * Mg)

    delta = 0.5 * (delta + delta.conj().T)
    resid = lyapunov_residual(X, Mg, delta)
    if resid > resid_tol:
        raise IllConditioned(f"steady-state residual {resid:.2e} > {resid_tol}")
    return CorrelatorState(delta, time=np.inf, residual=resid)


def steady_state(params: ModelParams, resid_tol: float = 1e-8) -> CorrelatorState:
    """Convenience wrapper: steady correlator of the configured model."""
    return solve_lyapunov(damping_matrix(params), gain_matrix(params), resid_tol)


def steady_density_integral(params: ModelParams, epsrel: float = 1e-8,
                            check_stability: bool = True) -> LossProfile:
    """B-site steady densities from the frequency integral
    n_B(x) = gamma_g/pi * int dw |<xB| (i w - X)^-1 |x0 A>|^2."""
    X = damping_matrix(params)
    if check_stability and stability_check(X).classification == "unstable":
        raise UnstableDamping("damping matrix unstable; no steady state")
    rhs = np.zeros((params.dim, 1), dtype=complex)
    rhs[flat_index(params.x0, "A"), 0] = 1.0
    res, err = _resolvent_quadrature(X, rhs, params, shift=1.0j, epsrel=epsrel)
    return LossProfile(params.gamma_g * res[:, 0], quad_error=params.gamma_g * err)


def density_profile_sweep(params: ModelParams, x0_values, epsrel: float = 1e-8,
                          check_stability: bool = True) -> dict[int, LossProfile]:
    """steady_density_integral over many pump positions.

    Balanced pumping leaves X independent of x0, so a single banded LU per
    frequency serves every pump column at once; the imbalanced case falls
    back to one integral per x0.
    """
    x0_values = list(x0_values)
    if params.delta_gamma != 0.0:
        return {x0: steady_density_integral(params.replace(x0=x0), epsrel=epsrel,
                                            check_stability=check_stability)
                for x0 in x0_values}
    X = damping_matrix(params)
    if check_stability and stability_check(X).classification == "unstable":
        raise UnstableDamping("damping matrix unstable; no steady state")
    rhs = np.zeros((params.dim, len(x0_values)), dtype=complex)
    for c, x0 in enumerate(x0_values):
        rhs[flat_index(x0, "A"), c] = 1.0
    res, err = _resolvent_quadrature(X, rhs, params, shift=1.0j, epsrel=epsrel)
    return {x0: LossProfile(params.gamma_g * res[:, c], quad_error=params.gamma_g * err)
            for c, x0 in enumerate(x0_values)}


def evolve_correlator(X: np.ndarray, Mg: np.ndarray, delta0: np.ndarray | None = None,
                      t_max: float = 500.0, dt: float | None = None,
                      steady_tol: float | None = None,
                      record_times=()) -> list[CorrelatorState]:
    """RK4 integration of d Delta/dt = X Delta + Delta X^dag + 2 Mg.

    Returns the recorded snapshots plus the final state (always last).  If
    steady_tol is given, integration stops once the relative defect
    ||d Delta/dt|| / ||2 Mg|| falls below it.
    """
    N = X.shape[0]
    rho = float(np.abs(np.linalg.eigvals(X)).max())
    if dt is None:
        dt = 0.5 / rho
    if dt * rho >= 1.0:
        raise StepTooLarge(f"dt*rho = {dt * rho:.2f} >= 1")

    delta = np.zeros((N, N), dtype=complex) if delta0 is None else np.array(delta0, dtype=complex)
    src = 2.0 * Mg
    src_norm = float(np.linalg.norm(src))
    Xd = X.conj().T

    def F(D):
        return X @ D + D @ Xd + src

    record_times = sorted(record_times)
    next_rec = 0
    out: list[CorrelatorState] = []
    t = 0.0
    n_steps = int(np.ceil(t_max / dt))
    for i in range(n_steps):
        k1 = F(delta)
        k2 = F(delta + 0.5 * dt * k1)
        k3 = F(delta + 0.5 * dt * k2)
        k4 = F(delta + dt * k3)
        delta += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        delta = 0.5 * (delta + delta.conj().T)
        t += dt
        while next_rec < len(record_times) and t >= record_times[next_rec]:
            out.append(CorrelatorState(delta.copy(), time=t,
                                       residual=float(np.linalg.norm(F(delta)) / src_norm)))
            next_rec += 1
        if steady_tol is not None and i % 50 == 0:
            if np.linalg.norm(F(delta)) / src_norm < steady_tol:
                break
    out.append(CorrelatorState(delta, time=t,
                               residual=float(np.linalg.norm(F(delta)) / src_norm)))
    return out
