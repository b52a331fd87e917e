"""Exception types raised by the numerical routines."""


class EdgeburstError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EdgeburstError):
    """Invalid or inconsistent configuration input."""


class NotGapless(EdgeburstError):
    """Requested quantity only exists in the gapless regime 0 < t1 < t2."""


class DegenerateRoots(EdgeburstError):
    """The two spatial-decay roots coincide in modulus (parameter boundary)."""


class PoleOnContour(EdgeburstError):
    """A decay root sits on the reference circle; the contour split is ill-defined."""


class Resonance(EdgeburstError):
    """Impurity denominator 1 - dg*G_AA vanishes (onset of instability)."""


class NotConverged(EdgeburstError):
    """Time integration did not reach the requested residual by t_max."""


class QuadratureNotConverged(EdgeburstError):
    """Adaptive frequency quadrature failed to reach the requested tolerance."""


class UnstableDamping(EdgeburstError):
    """Damping matrix has an eigenvalue with positive real part."""


class IllConditioned(EdgeburstError):
    """Steady-state solve is singular: marginal mode driven by the source,
    or no solution route met the residual requirement."""


class StepTooLarge(EdgeburstError):
    """Integrator step violates stability (dt * spectral_radius too large)."""


class NegativeDensity(EdgeburstError):
    """A diagonal density fell below the clamp tolerance; state is unphysical."""


class Blowup(EdgeburstError):
    """Nonlinear evolution diverged."""


class Diverged(EdgeburstError):
    """A stochastic trajectory exceeded the divergence threshold."""


class TooManyDivergences(EdgeburstError):
    """Discarded trajectory fraction exceeded the validity limit."""


class InsufficientPoints(EdgeburstError):
    """Not enough data points for a power-law fit."""


class NonPositiveValue(EdgeburstError):
    """Power-law fit requires strictly positive distances and values."""


class WindowTooSmall(EdgeburstError):
    """Bulk fit window shrank below the minimum point count."""
