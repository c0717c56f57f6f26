"""One-axis-twisting phase measurements with a spin echo."""

import math
import warnings

import numpy as np

from ..dynamics import DEFAULT_ATOL, DEFAULT_RTOL, DispersiveModel, EnsembleState, apply_rotation
from ..fitting import fit_line, fit_sinusoid
from ..params import derive_rates
from .common import ensemble_offsets, parallel_map, wrap_phase
from .sequences import PhaseScan, PulseSequence, run_sequence

__all__ = ["run_oat", "oat_rate_scan", "default_phase_grid", "CONTRAST_FLOOR"]

CONTRAST_FLOOR = 1e-3


def default_phase_grid(n=16):
    """``n`` equally spaced readout phases covering a full turn."""
    return np.linspace(0.0, 2 * math.pi, n, endpoint=False)


def run_oat(p, theta, tau, phase_grid=None, shape=None, n_groups=10_000,
            strategy="quantile", seed=None, rel_tol=DEFAULT_RTOL, abs_tol=DEFAULT_ATOL,
            coupling_cutoff=20.0):
    """Echo sequence with a phase-swept readout pulse.

    The ensemble is rotated by ``theta`` about x, evolves for ``tau / 2``,
    is flipped by pi about x, evolves another ``tau / 2`` and is read out
    after a pi/2 pulse about each azimuth of ``phase_grid``.

    Parameters
    ----------
    p : PhysicalParams
    theta, tau : float
        Preparation angle (rad) and total free evolution (s).
    phase_grid : array_like, optional
        Readout azimuths; 16 points over a full turn by default.
    shape : Lineshape, optional
        Offset distribution; see :func:`ensemble_offsets`.

    Returns
    -------
    PhaseScan
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    warn = []
    if abs(p.delta) < 5 * p.kappa:
        msg = f"|delta| = {abs(p.delta)} Hz is below 5 kappa; the exchange picture is marginal"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        warn.append(msg)
    phi = default_phase_grid() if phase_grid is None else np.asarray(phase_grid, float)
    rates = derive_rates(p)
    model = DispersiveModel.from_rates(rates, gamma_2=p.gamma_2, coupling_cutoff=coupling_cutoff)
    offsets = ensemble_offsets(p, shape, n_groups, strategy, seed)
    state = EnsembleState.polarized(offsets, p.n0)
    final, records = run_sequence(model, state, PulseSequence.hahn_echo(theta, tau),
                                  rel_tol, abs_tol)

    p_up = np.array([0.5 * (1.0 + apply_rotation(final, a, math.pi / 2).mean_field().s_z)
                     for a in phi])
    fit = fit_sinusoid(phi, p_up)
    # the readout maps an azimuth psi onto a fringe maximum at phi0 = psi - pi/2;
    # an ideal echo without interactions leaves psi = -pi/2
    raw = wrap_phase(fit["phi0"] + math.pi)
    s_plus = records[-1][1]["s_plus"]
    raw_direct = wrap_phase(math.atan2(s_plus.imag, s_plus.real) + math.pi / 2)
    contrast = 2.0 * fit["amplitude"]
    if contrast < CONTRAST_FLOOR:
        msg = f"contrast {contrast:.3g} below {CONTRAST_FLOOR}; phase is not defined"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        warn.append(msg)
    meta = {
        "experiment": "oat",
        "theta": theta,
        "tau": tau,
        "n_groups": len(offsets),
        "offsets": offsets.metadata(),
        "params": p.to_dict(),
        "rates": rates.to_dict(),
        "rel_tol": rel_tol,
        "abs_tol": abs_tol,
        "coupling_cutoff": coupling_cutoff,
        "expected_delta_phi": 2 * math.pi * rates.chi_n * tau * math.cos(theta),
        "warnings": warn,
    }
    return PhaseScan(phi=phi, p_up=p_up, delta_phi=-raw, delta_phi_sigma=fit.error("phi0"),
                     raw_phase=raw, direct_delta_phi=-raw_direct, contrast=contrast,
                     fit=fit, metadata=meta)


def _tau_scan(p, theta, tau_grid, threads, oat_kwargs):
    scans = parallel_map(lambda t: run_oat(p, theta, t, **oat_kwargs), tau_grid, threads)
    dphi = np.array([s.delta_phi for s in scans])
    line = fit_line(tau_grid, dphi)
    scale = 2 * math.pi * math.cos(theta)
    chi_n = line["slope"] / scale if scale != 0 else math.nan
    chi_sigma = line.error("slope") / abs(scale) if scale != 0 else math.inf
    return scans, dphi, line, chi_n, chi_sigma


def oat_rate_scan(p, theta=math.pi / 4, tau_grid=None, n0_grid=None, threads=1, **oat_kwargs):
    """Extract the collective interaction rate from OAT phase shifts.

    Parameters
    ----------
    p : PhysicalParams
    theta : float
        Fixed preparation angle; ``cos(theta)`` must not vanish.
    tau_grid : array_like, optional
        Evolution times; six points from 20 to 120 us by default.
    n0_grid : array_like, optional
        When given, a tau scan is run for every spin number and the
        extracted ``chi_n`` is fitted linearly in ``n0``.
    threads : int
        Worker threads for independent grid points.

    Returns
    -------
    FitResult
        For a tau scan the line ``delta_phi = slope * tau + intercept`` with
        ``info['chi_n']``; for an n0 scan the line ``chi_n = slope * n0 +
        intercept`` with ``info['chi']`` and ``info['g_squared']``.
    """
    tau_grid = (np.linspace(20e-6, 120e-6, 6) if tau_grid is None
                else np.asarray(tau_grid, dtype=float))
    if tau_grid.size < (2 if n0_grid is not None else 4):
        raise ValueError("a rate scan needs at least 4 grid points")
    expected = derive_rates(p).chi_n
    if n0_grid is None:
        scans, dphi, line, chi_n, chi_sigma = _tau_scan(p, theta, tau_grid, threads, oat_kwargs)
        line.model_id = "oat_tau_scan"
        line.info.update(theta=theta, tau=tau_grid.tolist(), delta_phi=dphi.tolist(),
                         delta_phi_direct=[s.direct_delta_phi for s in scans],
                         chi_n=chi_n, chi_n_sigma=chi_sigma, chi_n_expected=expected)
        return line

    n0_grid = np.asarray(n0_grid, dtype=float)
    if n0_grid.size < 4:
        raise ValueError("a rate scan needs at least 4 grid points")
    chis, sigmas = [], []
    for n0 in n0_grid:
        _, _, _, c, s = _tau_scan(p.replace(n0=float(n0)), theta, tau_grid, threads, oat_kwargs)
        chis.append(c)
        sigmas.append(s)
    line = fit_line(n0_grid, chis)
    chi = line["slope"]
    denom = 4 * p.delta
    g2 = chi * (4 * p.delta ** 2 + p.kappa ** 2) / denom if denom else math.nan
    line.model_id = "oat_n0_scan"
    line.info.update(theta=theta, n0=n0_grid.tolist(), chi_n=chis, chi_n_sigma=sigmas,
                     chi=chi, chi_sigma=line.error("slope"), g_squared=g2,
                     slope_times_delta=chi * p.delta, g_squared_expected=p.g ** 2)
    return line
