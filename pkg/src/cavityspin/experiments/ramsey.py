"""Ramsey coherence of an interacting, inhomogeneously broadened ensemble."""

import math
import warnings

import numpy as np

from ..dynamics import DispersiveModel, EnsembleState, apply_rotation, evolve_ensemble
from ..fitting import fit_exponential_family
from ..params import derive_rates
from .common import ensemble_offsets, parallel_map
from .sequences import TimeTrace

__all__ = [
    "run_ramsey",
    "ramsey_scan",
    "default_tau_grid",
    "crossing_time",
    "RAMSEY_RTOL",
    "RAMSEY_ATOL",
    "CONVERGENCE_TOL",
]

# Ramsey traces only need coherence to ~1e-5; see the README for the check
RAMSEY_RTOL = 1e-4
RAMSEY_ATOL = 1e-6
CONVERGENCE_TOL = 1e-3


def default_tau_grid(t_min=1e-6, t_max=1e-2, per_decade=40):
    """Log-spaced delays, ``per_decade`` points per decade including both ends."""
    decades = math.log10(t_max / t_min)
    n = int(round(decades * per_decade)) + 1
    return np.logspace(math.log10(t_min), math.log10(t_max), n)


def crossing_time(times, values, level=1.0 / math.e):
    """First time a decaying trace drops below ``level``, by log-linear interpolation.

    Returns ``inf`` when the trace never crosses and ``times[0]`` when it
    starts below the level.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    below = np.nonzero(y < level)[0]
    if below.size == 0:
        return math.inf
    i = int(below[0])
    if i == 0:
        return float(t[0])
    y0, y1 = max(y[i - 1], 1e-300), max(y[i], 1e-300)
    frac = (math.log(y0) - math.log(level)) / (math.log(y0) - math.log(y1))
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def _coherence(p, offsets, tau_grid, rel_tol, abs_tol, coupling_cutoff):
    rates = derive_rates(p)
    model = DispersiveModel.from_rates(rates, gamma_2=p.gamma_2, coupling_cutoff=coupling_cutoff)
    state = apply_rotation(EnsembleState.polarized(offsets, p.n0), 0.0, math.pi / 2)
    traj = evolve_ensemble(model, state, float(tau_grid[-1]), rel_tol, abs_tol,
                           record_grid=tau_grid, record=("coherence", "s_z"))
    keep = slice(1, None) if traj.times.size > tau_grid.size else slice(None)
    return traj.times[keep], traj["coherence"][keep], traj["s_z"][keep], traj.stats, rates


def run_ramsey(p, shape=None, n_groups=10_000, tau_grid=None, strategy="quantile", seed=None,
               rel_tol=RAMSEY_RTOL, abs_tol=RAMSEY_ATOL, coupling_cutoff=20.0,
               check_convergence=False):
    """Coherence ``|s_plus|`` after a pi/2 pulse and free evolution.

    All delays are read from a single integration, since the sequence for a
    delay ``tau`` is a prefix of the one for any longer delay.

    Parameters
    ----------
    p : PhysicalParams
    shape : Lineshape, optional
        Offset distribution; see :func:`ensemble_offsets`.
    n_groups : int
    tau_grid : array_like, optional
        Delays in seconds; defaults to :func:`default_tau_grid`.
    check_convergence : bool
        Repeat with twice the groups and warn when the coherence moves by
        more than ``CONVERGENCE_TOL``.

    Returns
    -------
    TimeTrace
    """
    if n_groups < 100:
        raise ValueError("Ramsey simulations need at least 100 groups")
    tau = default_tau_grid() if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if tau.size == 0 or np.any(tau < 0) or np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must be non-empty, non-negative and increasing")
    warn = []
    if abs(p.delta) < 5 * p.kappa:
        msg = f"|delta| = {abs(p.delta)} Hz is below 5 kappa; the exchange picture is marginal"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        warn.append(msg)
    offsets = ensemble_offsets(p, shape, n_groups, strategy, seed)
    times, coh, sz, stats, rates = _coherence(p, offsets, tau, rel_tol, abs_tol, coupling_cutoff)
    meta = {
        "experiment": "ramsey",
        "n_groups": int(n_groups),
        "offsets": offsets.metadata(),
        "params": p.to_dict(),
        "rates": rates.to_dict(),
        "rel_tol": rel_tol,
        "abs_tol": abs_tol,
        "coupling_cutoff": coupling_cutoff,
        "integrator": stats,
        "warnings": warn,
    }
    if check_convergence:
        doubled = ensemble_offsets(p, shape, 2 * n_groups, strategy,
                                   None if seed is None else seed + 1)
        _, coh2, _, _, _ = _coherence(p, doubled, tau, rel_tol, abs_tol, coupling_cutoff)
        change = float(np.max(np.abs(coh2 - coh)))
        meta["group_convergence"] = change
        if change > CONVERGENCE_TOL:
            msg = (f"doubling the group count changes the coherence by {change:.2e} "
                   f"> {CONVERGENCE_TOL}")
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            warn.append(msg)
    return TimeTrace(times, np.clip(coh, 0.0, None), "coherence", unit="1",
                     columns={"s_z": (sz, "1")}, metadata=meta)


def ramsey_scan(p, chi_n_values, shape=None, threads=1, fit=True, **kwargs):
    """Ramsey traces for several collective interaction rates.

    ``n0`` is rescaled for each value so that all other settings stay fixed.

    Returns
    -------
    traces : list of TimeTrace
    fits : list of FitResult or None
        Exponential-family fits with ``info['t2_star']``. The model-free
        1/e crossing is stored as ``metadata['t2_star_interp']``.
    """
    def one(chi_n):
        trace = run_ramsey(p.with_chi_n(chi_n), shape=shape, **kwargs)
        trace.metadata["chi_n"] = chi_n
        trace.metadata["t2_star_interp"] = crossing_time(trace.times, trace.values)
        result = fit_exponential_family(trace) if fit else None
        return trace, result

    out = parallel_map(one, list(chi_n_values), threads)
    return [t for t, _ in out], [f for _, f in out]
