"""Power-law fitting and bulk-edge scaling assembly.

Profiles enter as per-cell value arrays (1-based cells stored at index
cell-1).  Bulk decay is fitted on ln(value) vs ln(distance-to-pump) inside
a window that excludes both the pump neighborhood and the edge-burst tail;
edge scaling is always fitted across a pump-position sweep, never from a
single profile.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientPoints, NonPositiveValue, WindowTooSmall

MIN_FIT_POINTS = 6


@dataclass
class ScalingFit:
    """Result of a log-log least-squares fit; exponent is positive for decay."""
    exponent: float
    intercept: float          # ln(value) at unit distance
    window: tuple | None      # (lo_cell, hi_cell) when fitted from a profile
    r_squared: float
    stderr: float

    def value_at(self, distance) -> np.ndarray:
        """Fitted power law evaluated at the given distance(s)."""
        return np.exp(self.intercept) * np.asarray(distance, dtype=float) ** (-self.exponent)


def fit_power_law(distances, values, sigma=None, window=None) -> ScalingFit:
    """Least-squares line on (ln d, ln v); exponent = -slope.

    With sigma given (per-point standard errors of the values), points are
    weighted by the inverse variance of ln v, i.e. (v / sigma)^2, which is
    what heteroscedastic Monte Carlo profiles need.
    """
    d = np.asarray(distances, dtype=float)
    v = np.asarray(values, dtype=float)
    if d.size != v.size:
        raise ValueError("distances and values must have equal length")
    if d.size < MIN_FIT_POINTS:
        raise InsufficientPoints(f"{d.size} points < {MIN_FIT_POINTS}")
    if np.any(d <= 0) or np.any(v <= 0):
        raise NonPositiveValue("power-law fit needs strictly positive data")

    x = np.log(d)
    y = np.log(v)
    if sigma is not None:
        s = np.asarray(sigma, dtype=float)
        if np.any(s <= 0):
            raise NonPositiveValue("sigma must be strictly positive")
        w = (v / s) ** 2
    else:
        w = np.ones_like(x)

    W = w.sum()
    xbar = (w * x).sum() / W
    ybar = (w * y).sum() / W
    sxx = (w * (x - xbar) ** 2).sum()
    sxy = (w * (x - xbar) * (y - ybar)).sum()
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    sstot = (w * (y - ybar) ** 2).sum()
    ssres = (w * resid ** 2).sum()
    r2 = 1.0 - ssres / sstot if sstot > 0 else 1.0
    n = d.size
    dof = max(n - 2, 1)
    slope_var = (ssres / dof) / sxx
    return ScalingFit(exponent=float(-slope), intercept=float(intercept),
                      window=window, r_squared=float(r2),
                      stderr=float(np.sqrt(slope_var)))


def select_bulk_window(profile, x0: int, d_near: int = 5, x_min: int = 10,
                       sigma=None, min_points: int = MIN_FIT_POINTS) -> tuple[int, int]:
    """Fit window {x : lo <= x <= x0 - d_near} on the edge side of the pump.

    lo starts at x_min and grows until the profile decays monotonically with
    distance inside the window (this sheds the edge-burst tail, which rises
    toward x = 1).  With sigma given, violations smaller than three combined
    standard errors are tolerated.
    """
    v = np.asarray(profile, dtype=float)
    hi = x0 - d_near
    lo = x_min

    def monotone_from(lo):
        seg = v[lo - 1:hi]           # values at cells lo..hi
        if sigma is not None:
            s = np.asarray(sigma, dtype=float)[lo - 1:hi]
            slack = 3.0 * (s[:-1] + s[1:])
        else:
            slack = 0.0
        return np.all(seg[:-1] <= seg[1:] + slack)

    while hi - lo + 1 >= min_points and not monotone_from(lo):
        lo += 1
    if hi - lo + 1 < min_points:
        raise WindowTooSmall(
            f"bulk window [{lo}, {hi}] has fewer than {min_points} cells")
    return lo, hi


def fit_bulk(profile, x0: int, sigma=None, **window_kw) -> ScalingFit:
    """Power-law fit of a single profile over its selected bulk window."""
    lo, hi = select_bulk_window(profile, x0, sigma=sigma, **window_kw)
    xs = np.arange(lo, hi + 1)
    d = (x0 - xs).astype(float)
    v = np.asarray(profile, dtype=float)[xs - 1]
    s = None if sigma is None else np.asarray(sigma, dtype=float)[xs - 1]
    return fit_power_law(d, v, sigma=s, window=(lo, hi))


def edge_series(profiles: dict) -> tuple[np.ndarray, np.ndarray]:
    """(x0 - 1, value at cell 1) across a pump sweep, sorted by distance."""
    x0s = np.array(sorted(profiles.keys()), dtype=float)
    vals = np.array([np.asarray(profiles[int(x0)])[0] for x0 in x0s])
    return x0s - 1.0, vals


def fit_edge(profiles: dict, sigmas: dict | None = None) -> ScalingFit:
    """Power-law fit of the edge value against pump distance across a sweep."""
    d, v = edge_series(profiles)
    s = None
    if sigmas is not None:
        s = np.array([np.asarray(sigmas[x0])[0] for x0 in sorted(profiles.keys())])
    return fit_power_law(d, v, sigma=s)


def has_edge_burst(profile, x0: int, sigma=None, factor: float = 3.0,
                   **window_kw) -> bool:
    """Edge-burst test: cell 1 beats cell 2 and exceeds the bulk power law
    extrapolated to the edge by at least `factor`."""
    v = np.asarray(profile, dtype=float)
    if v[0] <= v[1]:
        return False
    try:
        fit = fit_bulk(profile, x0, sigma=sigma, **window_kw)
    except WindowTooSmall:
        return False
    return bool(v[0] >= factor * fit.value_at(x0 - 1.0))


def scaling_report(profiles: dict, sigmas: dict | None = None,
                   constraints: dict | None = None, **window_kw) -> dict:
    """Assemble bulk/edge exponents and constraint checks for a pump sweep.

    profiles maps x0 -> per-cell values.  The bulk exponent is the median of
    per-profile fits (windows that fail to select are skipped and listed);
    the edge exponent comes from the sweep's edge series.  constraints is an
    optional mapping name -> (measured, expected, tolerance); each entry is
    reported with its relative deviation and a pass flag.
    """
    per_x0 = {}
    skipped = []
    for x0 in sorted(profiles.keys()):
        s = None if sigmas is None else sigmas[x0]
        try:
            per_x0[x0] = fit_bulk(profiles[x0], x0, sigma=s, **window_kw)
        except (WindowTooSmall, InsufficientPoints, NonPositiveValue):
            skipped.append(x0)
    if not per_x0:
        raise WindowTooSmall("no pump position admitted a bulk window")
    alpha_b = float(np.median([f.exponent for f in per_x0.values()]))
    efit = fit_edge(profiles, sigmas)
    report = {
        "alpha_b": alpha_b,
        "alpha_e": efit.exponent,
        "difference": alpha_b - efit.exponent,
        "edge_fit": efit,
        "bulk_fits": per_x0,
        "skipped_x0": skipped,
    }
    if constraints:
        checks = {}
        for name, (measured, expected, tol) in constraints.items():
            dev = abs(measured - expected) / abs(expected) if expected else abs(measured)
            checks[name] = {"measured": float(measured), "expected": float(expected),
                            "rel_deviation": float(dev), "ok": bool(dev <= tol)}
        report["constraint_checks"] = checks
    return report
