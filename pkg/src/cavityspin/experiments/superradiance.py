"""Superradiant emission after a global rotation from the ground state."""

import math
import warnings

import numpy as np

from ..dynamics import (DEFAULT_ATOL, DEFAULT_RTOL, BlochState, CollectiveModel,
                        apply_rotation, integrate)
from ..params import derive_rates
from .sequences import TimeTrace

__all__ = [
    "run_superradiance",
    "emission_intensity",
    "burst_delay",
    "DEFAULT_EPSILON",
    "NEAR_INVERSION_OFFSET",
]

# smallest allowed distance of the preparation angle from full inversion
DEFAULT_EPSILON = 1e-3
# preparation angle pi - this value is used for peak-scaling scans
NEAR_INVERSION_OFFSET = 0.05
# below this spin number the single-spin decay visibly distorts the burst
SMALL_N0 = 1e3


def emission_intensity(s_plus_abs2, gamma_sr_single, n0):
    """Mean-field emitted power ``Gamma_SR^ang * n0^2 / 4 * |s_plus|^2`` (1/s)."""
    return 2.0 * math.pi * gamma_sr_single * n0 * n0 / 4.0 * np.asarray(s_plus_abs2)


def burst_delay(gamma_c, theta):
    """Closed-form peak time ``(4 / Gamma_c^ang) artanh(-cos theta)``.

    Negative for ``theta < pi / 2``, where the emission decays from ``t = 0``.
    """
    return 4.0 / (2.0 * math.pi * gamma_c) * math.atanh(-math.cos(theta))


def run_superradiance(p, theta, t_max, n_points=2001, epsilon=DEFAULT_EPSILON,
                      rel_tol=DEFAULT_RTOL, abs_tol=DEFAULT_ATOL, self_decay=True):
    """Simulate the emission following a rotation by ``theta`` from the south pole.

    Parameters
    ----------
    p : PhysicalParams
    theta : float
        Preparation angle, ``0 < theta <= pi - epsilon``.
    t_max : float
        Length of the recorded window in seconds.
    n_points : int
        Uniform samples in ``[0, t_max]``.
    epsilon : float
        Inversion floor; exact inversion is a mean-field fixed point.

    Returns
    -------
    TimeTrace
        Raw intensity (1/s) with columns for the peak-normalized intensity,
        ``s_z`` and ``|s_plus|``.
    """
    if not 0 < epsilon < math.pi:
        raise ValueError("epsilon must lie in (0, pi)")
    if not 0 < theta <= math.pi - epsilon:
        raise ValueError(
            f"theta = {theta} is outside (0, pi - epsilon] with epsilon = {epsilon}; "
            "full inversion never radiates in mean field, use theta <= pi - epsilon "
            "or lower epsilon")
    if not (t_max > 0 and math.isfinite(t_max)):
        raise ValueError("t_max must be positive and finite")
    warn = []
    if abs(p.delta) >= p.kappa:
        msg = f"|delta| = {abs(p.delta)} Hz is not below kappa = {p.kappa} Hz; emission is not resonant"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        warn.append(msg)
    if self_decay and p.n0 < SMALL_N0:
        msg = (f"n0 = {p.n0:g} is small; single-spin decay at gamma_c / n0 distorts the "
               "collective burst (give g_hz or n0 for a realistic ensemble)")
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        warn.append(msg)
    rates = derive_rates(p)
    model = CollectiveModel(rates.gamma_c, rates.gamma_sr_single, self_decay=self_decay)
    state = apply_rotation(BlochState.south_pole(), 0.0, theta)
    grid = np.linspace(0.0, t_max, int(n_points))
    traj = integrate(model, state, (0.0, t_max), rel_tol=rel_tol, abs_tol=abs_tol,
                     record_grid=grid, record=("s_plus", "s_z"))
    sp2 = np.abs(traj["s_plus"]) ** 2
    intensity = emission_intensity(sp2, rates.gamma_sr_single, p.n0)
    peak = float(np.max(intensity))
    norm = intensity / peak if peak > 0 else np.zeros_like(intensity)
    meta = {
        "experiment": "superradiance",
        "theta": theta,
        "epsilon": epsilon,
        "params": p.to_dict(),
        "rates": rates.to_dict(),
        "rel_tol": rel_tol,
        "abs_tol": abs_tol,
        "self_decay": self_decay,
        "integrator": traj.stats,
        "warnings": warn,
    }
    return TimeTrace(traj.times, intensity, "intensity", unit="1/s",
                     columns={"intensity_norm": (norm, "1"),
                              "s_z": (traj["s_z"], "1"),
                              "s_plus_abs": (np.sqrt(sp2), "1")},
                     metadata=meta)
