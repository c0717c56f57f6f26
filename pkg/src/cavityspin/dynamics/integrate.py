"""Time integration of the mean-field models and recorded trajectories."""

from dataclasses import dataclass, field

import numpy as np

from .equations import TWO_PI, CollectiveModel, DispersiveModel
from .radau import BlockDiagonal, IntegrationError, radau
from .state import BlochState, EnsembleState, pairwise_sum

__all__ = ["Trajectory", "integrate", "DEFAULT_RTOL", "DEFAULT_ATOL"]

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-10

OBSERVABLES = ("s_plus", "s_z", "coherence")


@dataclass
class Trajectory:
    """Observables sampled on a time grid.

    Attributes
    ----------
    times : ndarray
        Strictly increasing sample times in seconds, starting at the start
        of the integration.
    states : dict of str -> ndarray
        Recorded observables. ``s_plus`` and ``s_z`` are the normalized
        collective components, ``coherence`` is ``|s_plus|``.
    record : tuple of str
        Names of the stored observables.
    final_state : BlochState or EnsembleState
    stats : dict
        Integrator counters.
    """

    times: np.ndarray
    states: dict
    record: tuple
    final_state: object = None
    stats: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.states[key]


def _grid(t_span, record_grid):
    t0, t1 = map(float, t_span)
    if not (np.isfinite(t0) and np.isfinite(t1)) or t1 < t0:
        raise ValueError(f"invalid time span {t_span!r}")
    if record_grid is None:
        grid = np.array([t0, t1]) if t1 > t0 else np.array([t0])
    else:
        grid = np.asarray(record_grid, dtype=float).reshape(-1)
        if grid.size and (np.any(np.diff(grid) <= 0) or grid[0] < t0 or grid[-1] > t1):
            raise ValueError("record grid must be strictly increasing inside t_span")
        if grid.size == 0 or grid[0] > t0:
            grid = np.concatenate([[t0], grid])
    return t0, t1, grid


def _check_record(record):
    record = tuple(OBSERVABLES if record is None else record)
    unknown = set(record) - set(OBSERVABLES)
    if unknown:
        raise ValueError(f"unknown observables {sorted(unknown)}; choose from {OBSERVABLES}")
    return record


def _collect(record, n):
    out = {}
    for name in record:
        out[name] = np.empty(n, dtype=complex if name == "s_plus" else float)
    return out


def integrate(rhs, state, t_span, rel_tol=DEFAULT_RTOL, abs_tol=DEFAULT_ATOL,
              record_grid=None, record=None, max_step=np.inf):
    """Integrate a mean-field model from ``state`` over ``t_span``.

    Parameters
    ----------
    rhs : CollectiveModel, DispersiveModel or callable
        Model of the dynamics. A plain callable must map a state to its
        derivative ``(d s_plus, d s_z)``.
    state : BlochState or EnsembleState
        Initial state at ``t_span[0]``.
    t_span : (float, float)
        Start and end time in seconds.
    rel_tol, abs_tol : float
        Integrator tolerances.
    record_grid : array_like, optional
        Sample times; the start time is prepended when missing.
    record : sequence of str, optional
        Observables to store, subset of ``('s_plus', 's_z', 'coherence')``.

    Returns
    -------
    Trajectory
    """
    if not (rel_tol > 0 and abs_tol > 0):
        raise ValueError("tolerances must be positive")
    t0, t1, grid = _grid(t_span, record_grid)
    record = _check_record(record)
    if isinstance(state, BlochState):
        return _integrate_bloch(rhs, state, t0, t1, grid, rel_tol, abs_tol, record, max_step)
    if isinstance(state, EnsembleState):
        if isinstance(rhs, DispersiveModel):
            return evolve_ensemble(rhs, state, t1 - t0, rel_tol, abs_tol,
                                   grid - t0, record, max_step, time_origin=t0)
        return _integrate_generic_ensemble(rhs, state, t0, t1, grid, rel_tol, abs_tol,
                                           record, max_step)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def _integrate_bloch(rhs, state, t0, t1, grid, rtol, atol, record, max_step):
    if isinstance(rhs, CollectiveModel):
        fun, jac = rhs.fun, rhs.jac
    else:
        def fun(t, y):
            dsp, dsz = rhs(BlochState(complex(y[0], y[1]), y[2]))
            return np.array([dsp.real, dsp.imag, dsz])
        jac = None
    out = _collect(record, grid.size)
    k = 0

    def on_eval(t, y):
        nonlocal k
        sp = complex(y[0], y[1])
        _store(out, k, sp, y[2], abs(sp))
        k += 1

    res = radau(fun, (t0, t1), state.vector, rtol=rtol, atol=atol, jac=jac,
                t_eval=grid, on_eval=on_eval, max_step=max_step)
    final = BlochState(complex(res.y[0], res.y[1]), res.y[2])
    return Trajectory(grid, out, record, final, res.stats)


def _store(out, k, sp, sz, coh):
    if "s_plus" in out:
        out["s_plus"][k] = sp
    if "s_z" in out:
        out["s_z"][k] = sz
    if "coherence" in out:
        out["coherence"][k] = coh


def _integrate_generic_ensemble(rhs, state, t0, t1, grid, rtol, atol, record, max_step):
    n = state.n_groups
    f = state.fractions

    def unpack(y, t):
        return state.with_groups(y[:n] + 1j * y[n:2 * n], y[2 * n:], time=t)

    def fun(t, y):
        dsp, dsz = rhs(unpack(y, t))
        return np.concatenate([dsp.real, dsp.imag, dsz])

    zero = BlockDiagonal(np.zeros((n, 3, 3)))
    out = _collect(record, grid.size)
    k = 0

    def on_eval(t, y):
        nonlocal k
        sp = pairwise_sum(f * (y[:n] + 1j * y[n:2 * n]))
        _store(out, k, sp, pairwise_sum(f * y[2 * n:]), abs(sp))
        k += 1

    y0 = np.concatenate([state.s_plus.real, state.s_plus.imag, state.s_z])
    res = radau(fun, (t0, t1), y0, rtol=rtol, atol=atol, jac=lambda t, y: zero,
                t_eval=grid, on_eval=on_eval, max_step=max_step)
    return Trajectory(grid, out, record, unpack(res.y, t1), res.stats)


def evolve_ensemble(model, state, duration, rel_tol=DEFAULT_RTOL, abs_tol=DEFAULT_ATOL,
                    record_grid=None, record=None, max_step=np.inf, time_origin=None):
    """Propagate an ensemble under a :class:`DispersiveModel`.

    Coupled groups are integrated in their own rotating frame,
    ``s_plus_j = s_tilde_j * exp(i omega_j tau)``, so that free precession is
    exact and only the interaction drives the integrator. Groups beyond the
    model's coupling cutoff evolve analytically.

    Parameters
    ----------
    model : DispersiveModel
    state : EnsembleState
    duration : float
        Segment length in seconds.
    record_grid : array_like, optional
        Sample times relative to the segment start.

    Returns
    -------
    Trajectory
        Times are absolute (``time_origin``, default ``state.time``, plus the
        relative grid).
    """
    if duration < 0:
        raise ValueError("duration must be >= 0")
    origin = state.time if time_origin is None else float(time_origin)
    record = _check_record(record)
    _, _, grid = _grid((0.0, duration), record_grid)

    n = state.n_groups
    f = state.fractions
    omega = TWO_PI * state.offsets.offsets
    c, g2, gz = model.coupling, model.dephasing, model.z_decay
    core = np.abs(state.offsets.offsets) <= model.cutoff_hz(state.offsets.offsets)
    spec = ~core
    idx = np.flatnonzero(core)
    nc = idx.size
    wc, fc = omega[idx], f[idx]
    sp0, sz0 = state.s_plus, state.s_z
    terms = np.empty(n, dtype=complex)

    def full_state(tau, y):
        sp = np.empty(n, dtype=complex)
        sz = np.empty(n)
        if nc:
            sp[idx] = (y[:nc] + 1j * y[nc:2 * nc]) * np.exp(1j * wc * tau)
            sz[idx] = y[2 * nc:]
        if nc < n:
            sp[spec] = sp0[spec] * np.exp((1j * omega[spec] - g2) * tau)
            sz[spec] = sz0[spec] * np.exp(-gz * tau)
        return sp, sz

    out = _collect(record, grid.size)
    k = 0

    def on_eval(tau, y):
        nonlocal k
        sp, sz = full_state(tau, y)
        np.multiply(f, sp, out=terms)
        s_hat = pairwise_sum(terms)
        _store(out, k, s_hat, pairwise_sum(f * sz), abs(s_hat))
        k += 1

    stats = {"n_steps": 0, "n_rejected": 0, "n_fev": 0, "n_jev": 0, "n_lu": 0}
    y_end = None
    if nc == 0 or duration == 0:
        for tau in grid:
            on_eval(tau, None if nc == 0 else _pack(sp0[idx], sz0[idx]))
        y_end = None if nc == 0 else _pack(sp0[idx], sz0[idx])
    else:
        cache = {}

        def phase_at(tau):
            # stage times repeat across Newton iterations of one step
            ph = cache.get(tau)
            if ph is None:
                if len(cache) > 8:
                    cache.clear()
                ph = cache[tau] = np.exp(1j * wc * tau)
            return ph

        def drive(tau, y):
            phase = phase_at(tau)
            s_hat = pairwise_sum(fc * phase * (y[:nc] + 1j * y[nc:2 * nc]))
            return (c * s_hat) * np.conj(phase)

        def fun(tau, y):
            u = drive(tau, y)
            ur, ui = u.real, u.imag
            x, yy, z = y[:nc], y[nc:2 * nc], y[2 * nc:]
            out = np.empty(3 * nc)
            np.multiply(ur, z, out=out[:nc])
            np.multiply(ui, z, out=out[nc:2 * nc])
            np.multiply(ur, x, out=out[2 * nc:])
            out[2 * nc:] += ui * yy
            out[2 * nc:] *= -1.0
            if g2:
                out[:2 * nc] -= g2 * y[:2 * nc]
            if gz:
                out[2 * nc:] -= gz * z
            return out

        def jac(tau, y):
            u = drive(tau, y)
            B = np.zeros((nc, 3, 3))
            B[:, 0, 0] = B[:, 1, 1] = -g2
            B[:, 0, 2] = u.real
            B[:, 1, 2] = u.imag
            B[:, 2, 0] = -u.real
            B[:, 2, 1] = -u.imag
            B[:, 2, 2] = -gz
            return BlockDiagonal(B)

        res = radau(fun, (0.0, duration), _pack(sp0[idx], sz0[idx]), rtol=rel_tol,
                    atol=abs_tol, jac=jac, t_eval=grid, on_eval=on_eval, max_step=max_step)
        stats = res.stats
        y_end = res.y
    sp, sz = full_state(duration, y_end)
    if not (np.all(np.isfinite(sp)) and np.all(np.isfinite(sz))):
        raise IntegrationError("non-finite ensemble state", origin + duration)
    stats = dict(stats, n_core=int(nc), n_free=int(n - nc))
    final = state.with_groups(sp, sz, time=origin + duration)
    return Trajectory(origin + grid, out, record, final, stats)


def _pack(sp, sz):
    return np.concatenate([sp.real, sp.imag, sz])
