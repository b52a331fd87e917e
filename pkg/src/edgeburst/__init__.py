"""Numerical toolkit for lossy two-band lattices: quench loss statistics,
steady-state correlators of quadratic and two-body-loss bosonic open chains,
non-Bloch decay analytics, and bulk-edge scaling analysis."""

__version__ = "0.1.0"

from .model import (ModelParams, bloch_hamiltonian, bloch_damping,
                    real_space_hamiltonian, hermitian_hamiltonian,
                    damping_matrix, gain_matrix, stability_check,
                    flat_index, site_of, b_sites)
from .spectral import (BetaPair, beta_roots, gbz_radius, pbc_spectrum,
                       gap_closing_frequency, expansion_coefficients,
                       residue_coefficient, onsite_greens_AA,
                       critical_imbalance, impurity_factor, beta_scan)
from .steady import (LossProfile, CorrelatorState, quench_loss,
                     loss_probability_integral, solve_lyapunov, steady_state,
                     steady_density_integral, density_profile_sweep,
                     evolve_correlator)
from .positivep import (SdeConfig, PhaseSpaceState, EnsembleAccumulator,
                        drift, diffusion_matrix, noise_matrix, step,
                        run_ensemble, ci_profile_config)
from .meanfield import (MeanFieldState, meanfield_damping, evolve_meanfield,
                        meanfield_exponents)
from .analysis import (ScalingFit, fit_power_law, select_bulk_window,
                       fit_bulk, fit_edge, edge_series, has_edge_burst,
                       scaling_report)
