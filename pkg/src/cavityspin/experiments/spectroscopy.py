"""Cavity transmission with a dispersively coupled spin ensemble."""

import math

import numpy as np

from ..fitting import FitResult, ModelSpec, least_squares
from ..params import ParameterError

__all__ = ["s21_model", "fit_s21", "synthetic_s21", "noise_std_for_snr"]


def _s21(f, g2, gamma_inh, kappa, kappa_out, f_c, f_s):
    if g2 == 0:
        # no ensemble term; avoids 0/0 on the spin line when gamma_inh = 0
        return 1j * kappa_out / (f - f_c + 0.5j * kappa)
    spin = f - f_s + 0.5j * gamma_inh
    return 1j * kappa_out / (f - f_c + 0.5j * kappa - g2 / spin)


def s21_model(omega_grid, p, omega_c, omega_s=None):
    """Complex transmission of the cavity loaded by the spin ensemble.

    The transfer function is homogeneous of degree zero in frequency, so it
    may be evaluated in Hz as long as all arguments share that unit.

    Parameters
    ----------
    omega_grid : array_like
        Probe frequencies (Hz).
    p : PhysicalParams
        Supplies ``g_coll``, ``kappa``, ``kappa_out`` and ``gamma_inh``.
    omega_c : float
        Cavity frequency (Hz).
    omega_s : float, optional
        Spin frequency (Hz); ``omega_c - p.delta`` by default.

    Returns
    -------
    ndarray of complex
    """
    f = np.asarray(omega_grid, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ParameterError("frequency grid must be finite")
    f_s = omega_c - p.delta if omega_s is None else omega_s
    return _s21(f, p.g_coll ** 2, p.gamma_inh, p.kappa, p.kappa_out, omega_c, f_s)


def noise_std_for_snr(spectrum, snr_db):
    """Complex noise standard deviation for a given peak signal-to-noise ratio."""
    return float(np.max(np.abs(spectrum))) * 10.0 ** (-snr_db / 20.0)


def synthetic_s21(omega_grid, p, omega_c, snr_db=None, seed=None, amplitude=1.0,
                  baseline=0.0):
    """Model spectrum ``amplitude * S21 + baseline`` with optional complex noise.

    The noise is circular Gaussian with total standard deviation set by
    ``snr_db`` relative to the peak magnitude.
    """
    clean = amplitude * s21_model(omega_grid, p, omega_c) + baseline
    if snr_db is None:
        return clean
    rng = np.random.default_rng(seed)
    sd = noise_std_for_snr(clean, snr_db) / math.sqrt(2.0)
    return clean + sd * (rng.standard_normal(clean.size) + 1j * rng.standard_normal(clean.size))


def _linear_coefficients(basis, y):
    """Least-squares coefficients of ``y`` on the columns of ``basis``."""
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return coef, float(np.sum(np.abs(basis @ coef - y) ** 2))


def _grid_guess(x, y, kappa, kappa_out, x_c, x_s, power):
    span = float(np.ptp(x))
    step = float(np.min(np.diff(np.sort(x)))) if x.size > 1 else span
    widths = np.logspace(math.log10(max(step, 1e-12 * span)), math.log10(span), 24)
    dist = max(abs(x_c - x_s), span)
    mags = np.logspace(math.log10(max(step, 1e-12) * 1e-2), math.log10(dist * dist), 48)
    best = (math.inf, 0.0, widths[0], None)
    for g2 in np.concatenate([[0.0], mags, -mags]):
        for w in widths:
            s = _s21(x, g2, w, kappa, kappa_out, x_c, x_s)
            if power:
                basis = np.column_stack([np.abs(s) ** 2, np.ones_like(x)])
            else:
                basis = np.column_stack([s, np.ones_like(s)])
            coef, rss = _linear_coefficients(basis, y)
            if rss < best[0]:
                best = (rss, g2, w, coef)
            if g2 == 0.0:
                break  # width is irrelevant without coupling
    return best[1:]


def fit_s21(omega_grid, spectrum, kappa, delta, omega_c, kappa_out=None, data="auto",
            guess=None, tol=1e-12):
    """Fit the collective coupling and inhomogeneous width from a spectrum.

    ``kappa``, ``delta`` and ``omega_c`` are held fixed. Complex data are
    modelled as ``A * S21 + B`` with complex ``A`` and ``B``; power data as
    ``a * |S21|^2 + b``. The coupling enters through ``g_coll^2``, which is
    free in sign so that a missing feature is reported as a value
    consistent with zero instead of a bound hit.

    Parameters
    ----------
    omega_grid : array_like
        Probe frequencies (Hz).
    spectrum : array_like
        Complex transmission or real ``|S21|^2``.
    kappa, delta, omega_c : float
        Fixed cavity linewidth, cavity-spin detuning and cavity frequency (Hz).
    kappa_out : float, optional
        Output coupling; only rescales the amplitude. ``kappa / 2`` by default.
    data : {'auto', 'complex', 'power'}
    guess : dict, optional
        Starting ``g_coll`` and ``gamma_inh``; a grid search is used otherwise.

    Returns
    -------
    FitResult
        Parameters ``g_coll`` and ``gamma_inh`` (Hz) plus amplitude and
        baseline terms. ``info['g_coll_sq']`` and its sigma hold the raw
        fitted coupling; ``info['flags']`` contains ``'feature_not_found'``
        when it is within two sigma of zero.
    """
    f = np.asarray(omega_grid, dtype=float).reshape(-1)
    y = np.asarray(spectrum).reshape(-1)
    if f.size != y.size:
        raise ValueError("frequency grid and spectrum differ in length")
    if not (kappa > 0):
        raise ParameterError("kappa must be positive")
    if data == "auto":
        data = "complex" if np.iscomplexobj(y) else "power"
    if data not in ("complex", "power"):
        raise ValueError("data must be 'complex', 'power' or 'auto'")
    power = data == "power"
    if power and np.iscomplexobj(y):
        raise ValueError("power data must be real")
    kappa_out = kappa / 2 if kappa_out is None else kappa_out
    f_s = omega_c - delta

    # work in units of the probe span, centred on the spin line
    scale = float(np.ptp(f)) or 1.0
    x = (f - f_s) / scale
    x_c, x_s, k = (omega_c - f_s) / scale, 0.0, kappa / scale
    k_out = kappa_out / scale
    if guess is None:
        g2_0, w_0, coef = _grid_guess(x, y, k, k_out, x_c, x_s, power)
    else:
        g2_0 = (guess["g_coll"] / scale) ** 2
        w_0 = guess["gamma_inh"] / scale
        s = _s21(x, g2_0, w_0, k, k_out, x_c, x_s)
        basis = (np.column_stack([np.abs(s) ** 2, np.ones_like(x)]) if power
                 else np.column_stack([s, np.ones_like(s)]))
        coef, _ = _linear_coefficients(basis, y)

    def parts(q):
        g2, w = q[0], q[1]
        spin = x - x_s + 0.5j * w
        d = x - x_c + 0.5j * k - g2 / spin
        s = 1j * k_out / d
        ds_dg2 = s / (d * spin)
        ds_dw = -s / d * (0.5j * g2 / spin ** 2)
        return s, ds_dg2, ds_dw

    if power:
        names = ("g_coll_sq", "gamma_inh", "amplitude", "baseline")
        x0 = [g2_0, w_0, max(float(coef[0].real), 1e-300), float(coef[1].real)]
        lower = [-np.inf, 0.0, 0.0, -np.inf]

        def residual(q, _):
            s, _, _ = parts(q)
            return q[2] * np.abs(s) ** 2 + q[3] - y

        def jac(q, _):
            s, dg, dw = parts(q)
            return np.column_stack([2 * q[2] * np.real(np.conj(s) * dg),
                                    2 * q[2] * np.real(np.conj(s) * dw),
                                    np.abs(s) ** 2, np.ones_like(x)])
    else:
        names = ("g_coll_sq", "gamma_inh", "amplitude_re", "amplitude_im",
                 "baseline_re", "baseline_im")
        x0 = [g2_0, w_0, coef[0].real, coef[0].imag, coef[1].real, coef[1].imag]
        lower = [-np.inf, 0.0, -np.inf, -np.inf, -np.inf, -np.inf]

        def residual(q, _):
            s, _, _ = parts(q)
            r = (q[2] + 1j * q[3]) * s + (q[4] + 1j * q[5]) - y
            return np.concatenate([r.real, r.imag])

        def jac(q, _):
            s, dg, dw = parts(q)
            a = q[2] + 1j * q[3]
            one = np.ones_like(s)
            cols = [a * dg, a * dw, s, 1j * s, one, 1j * one]
            return np.vstack([np.column_stack([c.real for c in cols]),
                              np.column_stack([c.imag for c in cols])])

    x0 = np.asarray(x0, dtype=float)
    x0[1] = max(x0[1], 1e-12)
    spec = ModelSpec(residual, names, x0, bounds=(lower, np.inf), jac=jac,
                     model_id=f"s21_{data}", scale=float(np.max(np.abs(y))))
    raw = least_squares(spec, None, tol=tol)

    g2 = raw["g_coll_sq"] * scale ** 2
    g2_sigma = raw.error("g_coll_sq") * scale ** 2
    g = math.sqrt(max(g2, 0.0))
    g_sigma = g2_sigma / (2 * g) if g > 0 else math.inf
    params = raw.params.copy()
    sigma = raw.sigma.copy()
    params[0], sigma[0] = g, g_sigma
    params[1], sigma[1] = raw["gamma_inh"] * scale, raw.error("gamma_inh") * scale
    flags = []
    if not abs(g2) > 2 * g2_sigma:
        flags.append("feature_not_found")
    info = {
        "g_coll_sq": g2,
        "g_coll_sq_sigma": g2_sigma,
        "kappa": kappa,
        "delta": delta,
        "omega_c": omega_c,
        "kappa_out": kappa_out,
        "data": data,
        "flags": flags,
    }
    return FitResult(params=params, sigma=sigma, names=("g_coll",) + names[1:],
                     residual_norm=raw.residual_norm, n_iterations=raw.n_iterations,
                     converged=raw.converged, model_id=raw.model_id, singular=raw.singular,
                     gradient_norm=raw.gradient_norm, n_points=raw.n_points,
                     message=raw.message, info=info)
