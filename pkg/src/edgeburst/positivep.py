"""Stochastic phase-space simulation of the two-body-loss chain.

The density matrix is represented over a doubled coherent-state space
(alpha, beta); the master equation becomes Ito stochastic differential
equations

    d alpha = [X* alpha - 2 Gamma alpha^2 beta] dt + (noise),
    d beta  = [X  beta  - 2 Gamma alpha beta^2] dt + (noise),

with Gamma = gamma2 on B sites, and normally-ordered correlators are
trajectory averages of beta-alpha monomials.  The noise matrix B obeys
B B^T = D and is fixed only up to right-multiplication by any O with
O O^T = 1; ``noise_matrix`` returns the principal-branch reference form,
while the vectorized ensemble path uses the sign-smoothed equivalent
i sqrt(2 gamma2) alpha (identical diffusion, cheaper to evaluate).

Trajectory streams are independent Philox counter-based generators keyed
by base_seed + trajectory index, so ensembles are reproducible and can be
sharded across processes and merged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, TooManyDivergences
from .model import ModelParams, b_sites, damping_matrix, flat_index

GENERATOR_NAME = "philox"


@dataclass(frozen=True)
class SdeConfig:
    """Euler-Maruyama run settings."""
    dt: float = 2e-3
    t_end: float = 200.0
    n_traj: int = 10_000
    base_seed: int = 0
    divergence_threshold: float = 1e6
    record_times: tuple = ()
    check_every: int = 50         # steps between divergence scans
    noise_form: str = "scaled"    # "scaled" | "principal"

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be > 0")
        if self.n_traj < 1:
            raise ConfigError("n_traj must be >= 1")
        rec = tuple(sorted(self.record_times)) or (self.t_end,)
        object.__setattr__(self, "record_times", rec)
        if self.t_end < rec[-1] - 1e-12:
            raise ConfigError("t_end must cover all record_times")
        if self.noise_form not in ("scaled", "principal"):
            raise ConfigError("noise_form must be 'scaled' or 'principal'")


@dataclass
class PhaseSpaceState:
    alpha: np.ndarray
    beta: np.ndarray
    time: float = 0.0
    diverged: bool = False


def _gamma_vec(params: ModelParams) -> np.ndarray:
    """Two-body rate per flat site: gamma2 on B, 0 on A."""
    g = np.zeros(params.dim)
    g[b_sites(params.L)] = params.gamma2
    return g


def drift(params: ModelParams, state: PhaseSpaceState) -> np.ndarray:
    """Deterministic flow, stacked as (d alpha; d beta), length 4L."""
    X = damping_matrix(params)
    G = _gamma_vec(params)
    a, b = state.alpha, state.beta
    da = X.conj() @ a - 2.0 * G * (a * a * b)
    db = X @ b - 2.0 * G * (a * b * b)
    return np.concatenate([da, db])


def diffusion_matrix(params: ModelParams, state: PhaseSpaceState) -> np.ndarray:
    """Diffusion D(v) in the stacked (alpha-block, beta-block) ordering.

    Only the gain rate appears here; pump loss is purely drift, so the same
    form covers balanced and imbalanced pumping.
    """
    N = params.dim
    G = _gamma_vec(params)
    D = np.zeros((2 * N, 2 * N), dtype=complex)
    a, b = state.alpha, state.beta
    idx = np.arange(N)
    D[idx, idx] = -2.0 * G * state.alpha**2
    D[N + idx, N + idx] = -2.0 * G * state.beta**2
    p = flat_index(params.x0, "A")
    D[p, N + p] = 2.0 * params.gamma_g
    D[N + p, p] = 2.0 * params.gamma_g
    return D


def noise_matrix(params: ModelParams, state: PhaseSpaceState) -> np.ndarray:
    """Reference noise matrix B(v) with B B^T = diffusion_matrix(v).

    Rows: stacked (alpha-block, beta-block); columns: two real Wiener
    channels per site, stacked the same way.  B-site entries carry the
    principal branch of sqrt(-2 gamma2 alpha^2) / sqrt(-2 gamma2 beta^2);
    the pump site carries the (gamma_g/2)^(1/2) [[1+i, 1-i], [1-i, 1+i]]
    block across its two channels.
    """
    N = params.dim
    G = _gamma_vec(params)
    B = np.zeros((2 * N, 2 * N), dtype=complex)
    idx = np.arange(N)
    B[idx, idx] = np.sqrt(-2.0 * G * state.alpha**2 + 0j)
    B[N + idx, N + idx] = np.sqrt(-2.0 * G * state.beta**2 + 0j)
    p = flat_index(params.x0, "A")
    c = np.sqrt(params.gamma_g / 2.0)
    B[p, p] += c * (1 + 1j)
    B[p, N + p] += c * (1 - 1j)
    B[N + p, p] += c * (1 - 1j)
    B[N + p, N + p] += c * (1 + 1j)
    return B


def step(params: ModelParams, state: PhaseSpaceState, dW: np.ndarray,
         dt: float, divergence_threshold: float = 1e6) -> PhaseSpaceState:
    """One Euler-Maruyama update v -> v + A(v) dt + B(v) dW.

    dW holds 4L real Wiener increments of variance dt (stacked channel
    ordering of noise_matrix).  The returned state carries a diverged flag
    once any |alpha| or |beta| exceeds the threshold.
    """
    N = params.dim
    if dW.shape != (2 * N,):
        raise ConfigError(f"dW must have shape ({2*N},)")
    v = np.concatenate([state.alpha, state.beta])
    v = v + drift(params, state) * dt + noise_matrix(params, state) @ dW
    a, b = v[:N], v[N:]
    m = max(np.abs(a).max(), np.abs(b).max())
    return PhaseSpaceState(a, b, state.time + dt,
                           diverged=bool(state.diverged or m > divergence_threshold))


@dataclass
class EnsembleAccumulator:
    """Running trajectory-sum statistics at one record time.

    Holds sums and sums of squares so that accumulators from independent
    shards merge by plain addition.  two_point is the on-site beta_i alpha_i
    estimator over all flat sites; four_point is beta^2 alpha^2 over B sites.
    """
    n_sites: int
    n_cells: int
    time: float
    count: int = 0
    discard_count: int = 0
    tp_sum: np.ndarray = None
    tp_sumsq_re: np.ndarray = None
    tp_sumsq_im: np.ndarray = None
    fp_sum: np.ndarray = None
    fp_sumsq_re: np.ndarray = None
    fp_sumsq_im: np.ndarray = None
    sum_c_sum: float = 0.0        # per-trajectory sum_x Re(beta^2 alpha^2)_xB
    sum_c_sumsq: float = 0.0
    sum_n_sum: float = 0.0        # per-trajectory sum_x Re(beta alpha)_xB
    sum_n_sumsq: float = 0.0

    def __post_init__(self):
        if self.tp_sum is None:
            self.tp_sum = np.zeros(self.n_sites, dtype=complex)
            self.tp_sumsq_re = np.zeros(self.n_sites)
            self.tp_sumsq_im = np.zeros(self.n_sites)
            self.fp_sum = np.zeros(self.n_cells, dtype=complex)
            self.fp_sumsq_re = np.zeros(self.n_cells)
            self.fp_sumsq_im = np.zeros(self.n_cells)

    def add_batch(self, tp: np.ndarray, fp: np.ndarray, n_discarded: int):
        """Accumulate a (batch, sites) block of per-trajectory estimator values."""
        self.count += tp.shape[0]
        self.discard_count += n_discarded
        self.tp_sum += tp.sum(axis=0)
        self.tp_sumsq_re += (tp.real**2).sum(axis=0)
        self.tp_sumsq_im += (tp.imag**2).sum(axis=0)
        self.fp_sum += fp.sum(axis=0)
        self.fp_sumsq_re += (fp.real**2).sum(axis=0)
        self.fp_sumsq_im += (fp.imag**2).sum(axis=0)
        sc = fp.real.sum(axis=1)
        self.sum_c_sum += sc.sum()
        self.sum_c_sumsq += (sc**2).sum()
        sn = tp.real[:, 1::2].sum(axis=1)
        self.sum_n_sum += sn.sum()
        self.sum_n_sumsq += (sn**2).sum()

    def merge(self, other: "EnsembleAccumulator") -> "EnsembleAccumulator":
        if (other.n_sites, other.n_cells) != (self.n_sites, self.n_cells):
            raise ConfigError("cannot merge accumulators of different geometry")
        out = EnsembleAccumulator(self.n_sites, self.n_cells, self.time)
        out.count = self.count + other.count
        out.discard_count = self.discard_count + other.discard_count
        for name in ("tp_sum", "tp_sumsq_re", "tp_sumsq_im",
                     "fp_sum", "fp_sumsq_re", "fp_sumsq_im"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        for name in ("sum_c_sum", "sum_c_sumsq", "sum_n_sum", "sum_n_sumsq"):
            setattr(out, name, getattr(self, name) + getattr(other, name))
        return out

    # --- derived statistics ---
    def _stderr(self, sumsq, mean, n):
        var = np.maximum(sumsq / n - mean**2, 0.0)
        return np.sqrt(var / max(n - 1, 1))

    @property
    def discard_fraction(self) -> float:
        tot = self.count + self.discard_count
        return self.discard_count / tot if tot else 0.0

    @property
    def two_point(self) -> np.ndarray:
        """Complex on-site estimator mean over all flat sites."""
        return self.tp_sum / self.count

    @property
    def two_point_stderr(self) -> np.ndarray:
        return self._stderr(self.tp_sumsq_re, self.tp_sum.real / self.count,
                            self.count)

    @property
    def n_B(self) -> np.ndarray:
        return (self.tp_sum.real / self.count)[1::2]

    @property
    def n_B_stderr(self) -> np.ndarray:
        return self._stderr(self.tp_sumsq_re, self.tp_sum.real / self.count,
                            self.count)[1::2]

    @property
    def n_B_imag(self) -> np.ndarray:
        return (self.tp_sum.imag / self.count)[1::2]

    @property
    def n_B_imag_stderr(self) -> np.ndarray:
        return self._stderr(self.tp_sumsq_im, self.tp_sum.imag / self.count,
                            self.count)[1::2]

    @property
    def C_B(self) -> np.ndarray:
        return self.fp_sum.real / self.count

    @property
    def C_B_stderr(self) -> np.ndarray:
        return self._stderr(self.fp_sumsq_re, self.fp_sum.real / self.count,
                            self.count)

    @property
    def sum_C(self) -> tuple[float, float]:
        m = self.sum_c_sum / self.count
        return m, float(self._stderr(self.sum_c_sumsq, m, self.count))

    @property
    def sum_n(self) -> tuple[float, float]:
        m = self.sum_n_sum / self.count
        return m, float(self._stderr(self.sum_n_sumsq, m, self.count))


def run_ensemble(params: ModelParams, config: SdeConfig,
                 traj_range: tuple[int, int] | None = None,
                 max_discard_fraction: float = 0.01,
                 batch_size: int = 2048,
                 noise_chunk: int = 128) -> dict[float, EnsembleAccumulator]:
    """Simulate the trajectory ensemble and return accumulators per record time.

    Trajectories start from alpha = beta = 0, carry their own Philox stream
    (key = base_seed + global trajectory index), and are stepped in
    vectorized batches.  traj_range selects a shard [start, stop) of the
    full ensemble so runs can be distributed and merged.
    """
    N = params.dim
    L = params.L
    X = damping_matrix(params)
    Ma = np.ascontiguousarray(X.conj().T)   # row-vector form of X* alpha
    Mb = np.ascontiguousarray(X.T)          # row-vector form of X beta
    p = flat_index(params.x0, "A")
    Bsl = slice(1, N, 2)
    g2 = params.gamma2
    c1 = np.sqrt(params.gamma_g / 2.0) * (1 + 1j)
    c2 = np.sqrt(params.gamma_g / 2.0) * (1 - 1j)
    scaled_coef = 1j * np.sqrt(2.0 * g2)

    dt = config.dt
    sqdt = np.sqrt(dt)
    n_steps = int(round(config.t_end / dt))
    rec_steps = {}
    for tr in config.record_times:
        s = int(round(tr / dt))
        if abs(s * dt - tr) > 1e-9:
            raise ConfigError(f"record time {tr} is not a multiple of dt")
        rec_steps[s] = tr

    start, stop = traj_range if traj_range is not None else (0, config.n_traj)
    acc = {tr: EnsembleAccumulator(N, L, tr) for tr in config.record_times}

    for b0 in range(start, stop, batch_size):
        b1 = min(b0 + batch_size, stop)
        S = b1 - b0
        gens = [np.random.Generator(np.random.Philox(key=config.base_seed + i))
                for i in range(b0, b1)]
        a = np.zeros((S, N), dtype=complex)
        b = np.zeros((S, N), dtype=complex)
        alive = np.ones(S, dtype=bool)
        ever_dead = np.zeros(S, dtype=bool)
        da = np.empty_like(a)
        db = np.empty_like(b)

        step_i = 0
        with np.errstate(over="ignore", invalid="ignore"):
            while step_i < n_steps:
                chunk = min(noise_chunk, n_steps - step_i)
                # per-trajectory streams, consumed in fixed (step, channel, site)
                # order: channel 0 drives alpha rows, channel 1 beta rows;
                # site columns are the L B-sites then the pump site.
                noise = np.empty((S, chunk, 2, L + 1))
                for s in range(S):
                    noise[s] = gens[s].standard_normal((chunk, 2, L + 1))
                noise *= sqdt
                for j in range(chunk):
                    na = noise[:, j, 0, :]
                    nb = noise[:, j, 1, :]
                    np.matmul(a, Ma, out=da)
                    np.matmul(b, Mb, out=db)
                    aB = a[:, Bsl]
                    bB = b[:, Bsl]
                    if g2 != 0.0:
                        prod = aB * bB
                        da[:, Bsl] -= (2.0 * g2) * (prod * aB)
                        db[:, Bsl] -= (2.0 * g2) * (prod * bB)
                        if config.noise_form == "scaled":
                            ca = scaled_coef * aB
                            cb = scaled_coef * bB
                        else:
                            ca = np.sqrt(-2.0 * g2 * aB**2 + 0j)
                            cb = np.sqrt(-2.0 * g2 * bB**2 + 0j)
                        noise_a = ca * na[:, :L]
                        noise_b = cb * nb[:, :L]
                    else:
                        noise_a = noise_b = None
                    a += dt * da
                    b += dt * db
                    if noise_a is not None:
                        a[:, Bsl] += noise_a
                        b[:, Bsl] += noise_b
                    a[:, p] += c1 * na[:, L] + c2 * nb[:, L]
                    b[:, p] += c2 * na[:, L] + c1 * nb[:, L]
                    step_i += 1

                    if step_i % config.check_every == 0 or step_i in rec_steps:
                        m = np.abs(a).max(axis=1)
                        np.maximum(m, np.abs(b).max(axis=1), out=m)
                        bad = alive & ((m > config.divergence_threshold)
                                       | ~np.isfinite(m))
                        if bad.any():
                            alive &= ~bad
                            ever_dead |= bad
                            a[bad] = 0.0
                            b[bad] = 0.0
                    if step_i in rec_steps:
                        tr = rec_steps[step_i]
                        tp = b[alive] * a[alive]
                        fp = (b[alive][:, Bsl] ** 2) * (a[alive][:, Bsl] ** 2)
                        acc[tr].add_batch(tp, fp, int(ever_dead.sum()))

    for tr, A in acc.items():
        if A.discard_fraction > max_discard_fraction:
            raise TooManyDivergences(
                f"discard fraction {A.discard_fraction:.3f} at t={tr} "
                f"exceeds {max_discard_fraction}")
    return acc


def ci_profile_config(base_seed: int = 20240801) -> tuple[ModelParams, SdeConfig]:
    """Reduced-scale two-body-loss run used by the fast verification suite."""
    params = ModelParams(t1=0.8, t2=1.0, gamma1=0.0, gamma2=0.01,
                         gamma_g=100.0, gamma_l=100.0, L=30, x0=25)
    cfg = SdeConfig(dt=1e-3, t_end=100.0, n_traj=2000, base_seed=base_seed,
                    record_times=(50.0, 100.0))
    return params, cfg
