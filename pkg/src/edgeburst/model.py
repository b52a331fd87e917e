"""Lattice model construction: Bloch and real-space Hamiltonians, damping
matrices, gain matrices, and stability classification.

Basis convention (shared by every module): unit cells are numbered 1..L,
each carrying an A and a B site, and the flat matrix index is
``2*(cell-1) + (0 for A, 1 for B)``.  B-site quantities therefore live on
the odd stride ``[1::2]``.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict, fields
from typing import NamedTuple

import numpy as np

from .errors import ConfigError

BOUNDARY_CONDITIONS = ("OBC", "PBC")
STATISTICS = ("Bosonic", "Fermionic")

# classification band for eigenvalue real parts: above eigensolver noise
# (~1e-12 at these sizes), far below physical gaps (~1e-1)
STABILITY_EPS = 1e-9

_SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
_SIGMA_0 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class ModelParams:
    """Parameter set of the two-band lossy chain.

    t1 / t2 are the intracell / intercell hoppings, gamma1 the single-body
    B-site loss rate, gamma2 the two-body B-site loss rate, and gamma_g /
    gamma_l the incoherent gain / loss rates acting on the A site of unit
    cell x0.
    """

    t1: float
    t2: float
    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma_g: float = 0.0
    gamma_l: float = 0.0
    L: int = 2
    x0: int = 1
    bc: str = "OBC"
    statistics: str = "Bosonic"

    def __post_init__(self):
        if self.t2 == 0:
            raise ConfigError("t2 must be nonzero")
        for name in ("gamma1", "gamma2", "gamma_g", "gamma_l"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.L < 1 or int(self.L) != self.L:
            raise ConfigError("L must be a positive integer")
        if not 1 <= self.x0 <= self.L:
            raise ConfigError(f"x0 must lie in [1, {self.L}]")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise ConfigError(f"bc must be one of {BOUNDARY_CONDITIONS}")
        if self.statistics not in STATISTICS:
            raise ConfigError(f"statistics must be one of {STATISTICS}")
        if self.bc == "PBC" and self.L < 2:
            raise ConfigError("PBC requires L >= 2")

    @property
    def delta_gamma(self) -> float:
        """Gain-loss imbalance at the pump site."""
        return self.gamma_g - self.gamma_l

    @property
    def gapless(self) -> bool:
        """True when the dissipative spectrum touches the real axis (0 < t1 <= t2)."""
        return 0 < self.t1 <= self.t2

    @property
    def dim(self) -> int:
        """Flat Hilbert-space dimension 2L."""
        return 2 * self.L

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        """Build from a JSON-style mapping; unknown keys are an error."""
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown model parameter(s): {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **kw) -> "ModelParams":
        d = self.to_dict()
        d.update(kw)
        return ModelParams.from_dict(d)


def flat_index(cell: int, sublattice: str) -> int:
    """Flat index of site (cell, sublattice), cell in 1..L, sublattice 'A'|'B'."""
    if sublattice not in ("A", "B"):
        raise ConfigError("sublattice must be 'A' or 'B'")
    if cell < 1:
        raise ConfigError("cell index starts at 1")
    return 2 * (cell - 1) + (0 if sublattice == "A" else 1)


def site_of(flat: int) -> tuple[int, str]:
    """Inverse of flat_index: (cell, sublattice) of a flat index."""
    if flat < 0:
        raise ConfigError("flat index must be >= 0")
    return flat // 2 + 1, "A" if flat % 2 == 0 else "B"


def b_sites(L: int) -> np.ndarray:
    """Flat indices of all B sites of an L-cell chain."""
    return np.arange(1, 2 * L, 2)


def bloch_hamiltonian(params: ModelParams, k: float) -> np.ndarray:
    """Momentum-space Hamiltonian (t1 + t2 cos k) sx + (t2 sin k + i g1/2) sz - i g1/2."""
    t1, t2, g1 = params.t1, params.t2, params.gamma1
    return ((t1 + t2 * np.cos(k)) * _SIGMA_X
            + (t2 * np.sin(k) + 0.5j * g1) * _SIGMA_Z
            - 0.5j * g1 * _SIGMA_0)


def bloch_damping(params: ModelParams, k: float) -> np.ndarray:
    """Momentum-space damping matrix of the balanced-pump chain.

    X(k) = i(t1 + t2 cos k) sx - i(t2 sin k + i g1/2) sz - g1/2.  Its
    spectrum over the momentum grid equals that of i * conj(bloch_hamiltonian)
    (the two differ by k -> -k).
    """
    t1, t2, g1 = params.t1, params.t2, params.gamma1
    return (1j * (t1 + t2 * np.cos(k)) * _SIGMA_X
            - 1j * (t2 * np.sin(k) + 0.5j * g1) * _SIGMA_Z
            - 0.5 * g1 * _SIGMA_0)


def _assemble_chain(on: np.ndarray, hop: np.ndarray, L: int, pbc: bool) -> np.ndarray:
    """Block-tridiagonal chain with on-site block `on` and forward block `hop`
    (`hop` couples cell x to cell x+1, i.e. it is the H[x+1, x] block)."""
    N = 2 * L
    H = np.zeros((N, N), dtype=complex)
    hop_dag = hop.conj().T
    for x in range(L):
        H[2 * x:2 * x + 2, 2 * x:2 * x + 2] = on
    for x in range(L - 1):
        H[2 * (x + 1):2 * (x + 1) + 2, 2 * x:2 * x + 2] = hop
        H[2 * x:2 * x + 2, 2 * (x + 1):2 * (x + 1) + 2] = hop_dag
    if pbc:
        H[0:2, 2 * (L - 1):2 * L] = hop
        H[2 * (L - 1):2 * L, 0:2] = hop_dag
    return H


def hermitian_hamiltonian(params: ModelParams) -> np.ndarray:
    """Hermitian part H0 of the chain: hoppings without any loss term."""
    t1, t2 = params.t1, params.t2
    on = np.array([[0.0, t1], [t1, 0.0]], dtype=complex)
    hop = np.array([[0.5j * t2, 0.5 * t2], [0.5 * t2, -0.5j * t2]], dtype=complex)
    return _assemble_chain(on, hop, params.L, params.bc == "PBC")


def real_space_hamiltonian(params: ModelParams) -> np.ndarray:
    """Real-space non-Hermitian Hamiltonian H = H0 - i gamma1 * (B-site diagonal).

    Under PBC the Fourier transform reproduces bloch_hamiltonian at each
    allowed momentum; under OBC the intercell blocks are truncated at the ends.
    """
    H = hermitian_hamiltonian(params)
    bs = b_sites(params.L)
    H[bs, bs] -= 1j * params.gamma1
    return H


def gain_matrix(params: ModelParams) -> np.ndarray:
    """Gain source M(g): single entry gamma_g at (x0 A, x0 A)."""
    M = np.zeros((params.dim, params.dim), dtype=complex)
    p = flat_index(params.x0, "A")
    M[p, p] = params.gamma_g
    return M


def damping_matrix(params: ModelParams) -> np.ndarray:
    """Damping matrix generating the two-point-correlator dynamics.

    Bosonic:   X = i conj(H) + (gamma_g - gamma_l) |x0A><x0A|,
               which reduces to exactly i conj(H) for balanced pumping.
    Fermionic: X_F = i H0^T - gamma1 * (B diag) - (gamma_g + gamma_l) |x0A><x0A|.

    The two-body rate gamma2 never enters here; it acts at the level of the
    nonlinear / stochastic evolutions.
    """
    p = flat_index(params.x0, "A")
    if params.statistics == "Fermionic":
        X = 1j * hermitian_hamiltonian(params).T
        bs = b_sites(params.L)
        X[bs, bs] -= params.gamma1
        X[p, p] -= params.gamma_g + params.gamma_l
        return X
    X = 1j * real_space_hamiltonian(params).conj()
    X[p, p] += params.delta_gamma
    return X


class StabilityReport(NamedTuple):
    classification: str  # "stable" | "marginal" | "unstable"
    max_real: float


def stability_check(X: np.ndarray, eps: float = STABILITY_EPS) -> StabilityReport:
    """Classify a damping matrix by the largest eigenvalue real part.

    Marginal means |max Re| <= eps: dark states sit exactly on the axis, so
    the band is allowed rather than treated as instability.
    """
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ConfigError("stability_check expects a square matrix")
    max_real = float(np.linalg.eigvals(X).real.max())
    if max_real > eps:
        cls = "unstable"
    elif max_real < -eps:
        cls = "stable"
    else:
        cls = "marginal"
    return StabilityReport(cls, max_real)
