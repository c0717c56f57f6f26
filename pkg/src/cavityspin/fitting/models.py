"""Fit families used by the trace and scan analyses."""

import math
import warnings

import numpy as np

from scipy import optimize

from .core import FitError, FitResult, ModelSpec, least_squares

__all__ = [
    "fit_line",
    "fit_power_law",
    "fit_sinusoid",
    "fit_exponential_family",
    "fit_sech2_burst",
    "sech2_model",
    "exponential_model",
    "aicc",
    "e_fold_time",
    "AICC_THRESHOLD",
    "DEGENERATE_RATIO",
]

AICC_THRESHOLD = 10.0
DEGENERATE_RATIO = 0.05


def _xy(x, y, weights=None, min_points=2):
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size:
        raise FitError("x and y differ in length")
    if x.size < min_points:
        raise FitError(f"need at least {min_points} points, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise FitError("data contain non-finite values")
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    return x, y, w


def fit_line(x, y, weights=None, through_origin=False, tol=1e-12):
    """Fit ``y = slope * x + intercept``."""
    x, y, w = _xy(x, y, weights)
    A = np.column_stack([x, np.ones_like(x)])
    guess = np.linalg.lstsq(A * w[:, None], y * w, rcond=None)[0]
    fixed = [False, bool(through_origin)]
    if through_origin:
        guess[1] = 0.0

    def residual(p, _):
        return w * (p[0] * x + p[1] - y)

    def jac(p, _):
        return A * w[:, None]

    spec = ModelSpec(residual, ("slope", "intercept"), guess, fixed=fixed, jac=jac,
                     model_id="line", scale=float(np.max(np.abs(w * y))))
    return least_squares(spec, tol=tol)


def fit_power_law(x, y, tol=1e-12):
    """Fit ``y = a * x**b`` as a straight line in log-log coordinates."""
    x, y, _ = _xy(x, y)
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("power-law fit needs positive data")
    line = fit_line(np.log(x), np.log(y), tol=tol)
    b, log_a = line.params
    sb, sla = line.sigma
    a = math.exp(log_a)
    return FitResult(params=np.array([a, b]), sigma=np.array([a * sla, sb]),
                     names=("amplitude", "exponent"), residual_norm=line.residual_norm,
                     n_iterations=line.n_iterations, converged=line.converged,
                     model_id="power_law", singular=line.singular,
                     gradient_norm=line.gradient_norm, n_points=line.n_points,
                     message=line.message, info={"log_space": True})


def fit_sinusoid(phi, y, tol=1e-14):
    """Fit ``y = offset + amplitude * cos(phi - phi0)``.

    The linear problem in ``cos`` and ``sin`` provides the start point.
    ``phi0`` is returned in ``(-pi, pi]`` and ``amplitude >= 0``.
    """
    phi, y, _ = _xy(phi, y, min_points=3)
    A = np.column_stack([np.ones_like(phi), np.cos(phi), np.sin(phi)])
    c0, a, b = np.linalg.lstsq(A, y, rcond=None)[0]
    amp = math.hypot(a, b)
    phi0 = math.atan2(b, a)

    def residual(p, _):
        return p[0] + p[1] * np.cos(phi - p[2]) - y

    def jac(p, _):
        return np.column_stack([np.ones_like(phi), np.cos(phi - p[2]),
                                p[1] * np.sin(phi - p[2])])

    spec = ModelSpec(residual, ("offset", "amplitude", "phi0"), [c0, amp, phi0], jac=jac,
                     model_id="sinusoid", scale=float(np.max(np.abs(y))))
    res = least_squares(spec, tol=tol)
    if res.params[1] < 0:
        res.params[1] = -res.params[1]
        res.params[2] += math.pi
    res.params[2] = math.remainder(res.params[2], 2 * math.pi)
    return res


def exponential_model(t, params):
    """Sum of exponentials; ``params = [A1, k1, A2, k2, ...]`` with rates in 1/s."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for amp, rate in zip(params[0::2], params[1::2]):
        out = out + amp * np.exp(-rate * t)
    return out


def _exp_jac(t, params):
    cols = []
    for amp, rate in zip(params[0::2], params[1::2]):
        e = np.exp(-rate * t)
        cols += [e, -amp * t * e]
    return np.column_stack(cols)


def e_fold_time(params, covariance=None):
    """Time at which a sum of decaying exponentials falls to 1/e of its initial value.

    Parameters
    ----------
    params : array_like
        ``[A1, k1, A2, k2, ...]`` with non-negative rates and amplitudes.
    covariance : ndarray, optional
        Parameter covariance for first-order error propagation.

    Returns
    -------
    time, sigma : float
        ``inf`` when the static part alone exceeds the 1/e level.
    """
    params = np.asarray(params, dtype=float)
    amps, rates = params[0::2], params[1::2]
    target = amps.sum() / math.e
    if amps.sum() <= 0 or amps[rates <= 0].sum() >= target:
        return math.inf, math.inf

    def excess(x):
        return float(np.dot(amps, np.exp(-rates * x))) - target

    hi = 1.0 / rates[rates > 0].max()
    while excess(hi) > 0:
        hi *= 2.0
    t_e = optimize.brentq(excess, 0.0, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps)
    if covariance is None:
        return t_e, math.nan
    e = np.exp(-rates * t_e)
    # implicit derivative of sum A_i exp(-k_i t) = sum A_i / e
    grad = np.empty_like(params)
    grad[0::2] = e - 1.0 / math.e
    grad[1::2] = -amps * t_e * e
    slope = -float(np.dot(amps * rates, e))
    dt = -grad / slope
    cov = np.asarray(covariance, dtype=float)
    live = dt != 0
    sub = cov[np.ix_(live, live)]
    if not np.all(np.isfinite(sub)):
        return t_e, math.inf
    var = float(dt[live] @ sub @ dt[live])
    return t_e, math.sqrt(max(var, 0.0))


def aicc(rss, n, k, floor=0.0):
    """Corrected Akaike information criterion for Gaussian residuals."""
    rss = max(rss, floor)
    if rss <= 0:
        rss = np.finfo(float).tiny
    corr = 2.0 * k * (k + 1) / (n - k - 1) if n - k - 1 > 0 else np.inf
    return n * math.log(rss / n) + 2 * k + corr


def _trace_arrays(trace):
    if hasattr(trace, "times"):
        return np.asarray(trace.times, float), np.asarray(trace.values, float)
    t, y = trace
    return np.asarray(t, float), np.asarray(y, float)


def _single_guess(t, y):
    pos = y > 0.05 * np.max(np.abs(y))
    if pos.sum() >= 2 and np.ptp(t[pos]) > 0:
        slope, icpt = np.polyfit(t[pos], np.log(y[pos]), 1)
        rate = max(-slope, 0.0)
        amp = math.exp(icpt)
    else:
        rate, amp = 1.0 / max(np.ptp(t), 1e-300), float(y[0])
    return amp, rate


def _double_guess(t, y, single):
    """Peel off a slow tail, then fit the remainder."""
    n = t.size
    tail = slice(n // 2, n)
    amp2, k2 = _single_guess(t[tail], y[tail])
    rest = y - amp2 * np.exp(-k2 * t)
    head = slice(0, max(n // 2, 3))
    amp1, k1 = _single_guess(t[head], rest[head])
    if not (k1 > k2 > 0) or amp1 <= 0 or amp2 <= 0:
        a, k = single
        amp1, k1, amp2, k2 = 0.5 * a, 3.0 * k, 0.5 * a, k / 3.0
    return [amp1, k1, amp2, k2]


def _fit_exp(t, y, guess, tol):
    guess = np.asarray(guess, float)
    k = guess.size
    lo = np.tile([-np.inf, 0.0], k // 2)
    hi = np.full(k, np.inf)
    guess = np.clip(guess, lo, hi)

    def residual(p, _):
        return exponential_model(t, p) - y

    def jac(p, _):
        return _exp_jac(t, p)

    names = ("amplitude", "rate") if k == 2 else ("amplitude_1", "rate_1", "amplitude_2", "rate_2")
    spec = ModelSpec(residual, names, guess, bounds=(lo, hi), jac=jac,
                     model_id="single_exponential" if k == 2 else "double_exponential",
                     scale=float(np.max(np.abs(y))))
    return least_squares(spec, tol=tol)


def fit_exponential_family(trace, allow_double=True, tol=1e-12, multistart=False,
                           value_tol=1e-6):
    """Fit single and double exponential decays and select by corrected AIC.

    Parameters
    ----------
    trace : TimeTrace or (times, values)
    allow_double : bool
    multistart : bool
        Also try a fixed grid of start rates for the double model.
    value_tol : float
        Allowed excursion of the values above 1.

    Returns
    -------
    FitResult
        ``info`` holds ``t2_star`` (1/e time of the selected model curve)
        with its sigma, ``t2_star_dominant`` (decay time of the component
        with the largest amplitude), the component times sorted fast to
        slow with their amplitudes, ``delta_aicc`` and flags.
    """
    t, y = _trace_arrays(trace)
    t, y, _ = _xy(t, y, min_points=8)
    if np.any(y < -value_tol) or np.any(y > 1 + value_tol):
        raise FitError("coherence values must lie in [0, 1]")
    n = t.size
    floor = n * (8 * np.finfo(float).eps * max(1.0, np.max(np.abs(y)))) ** 2

    a0, k0 = _single_guess(t, y)
    single = _fit_exp(t, y, [a0, k0], tol)
    a1 = aicc(single.residual_norm ** 2, n, 2, floor)
    flags = []
    chosen = single
    delta = None
    double = None
    if allow_double:
        starts = [_double_guess(t, y, single.params)]
        if multistart:
            span = np.ptp(t)
            for f1 in (3.0, 10.0, 30.0):
                for f2 in (0.3, 0.1):
                    base = max(single.params[1], 1.0 / span)
                    starts.append([0.5, base * f1, 0.5, base * f2])
        fits = []
        for s in starts:
            try:
                fits.append(_fit_exp(t, y, s, tol))
            except FitError:
                continue
        if fits:
            double = min(fits, key=lambda r: r.residual_norm)
            a2 = aicc(double.residual_norm ** 2, n, 4, floor)
            delta = a1 - a2
            if delta > AICC_THRESHOLD:
                amp1, r1, amp2, r2 = double.params
                hi_rate, lo_rate = max(r1, r2), min(r1, r2)
                if lo_rate <= 0 or hi_rate <= 0:
                    flags.append("double_has_static_component")
                    chosen = double
                elif (hi_rate - lo_rate) / hi_rate < DEGENERATE_RATIO:
                    flags.append("double_collapsed")
                elif amp1 <= 0 or amp2 <= 0:
                    flags.append("double_rejected_negative_amplitude")
                else:
                    chosen = double

    info = {"delta_aicc": delta, "aicc_threshold": AICC_THRESHOLD, "flags": flags}
    amps = chosen.params[0::2]
    rates = chosen.params[1::2]
    if chosen is single and (rates[0] <= 0 or rates[0] * np.ptp(t) < 1e-9):
        flags.append("no_decay")
        chosen.converged = False
    order = np.argsort(-rates, kind="stable")
    t2, t2_sigma = e_fold_time(chosen.params, chosen.covariance)
    dominant = int(np.argmax(amps))
    info.update(selected="single" if chosen is single else "double",
                t2_star=t2, t2_star_sigma=t2_sigma,
                t2_star_dominant=1.0 / rates[dominant] if rates[dominant] > 0 else math.inf,
                times=[1.0 / r if r > 0 else math.inf for r in rates[order]],
                amplitudes=[float(a) for a in amps[order]])
    if double is not None:
        info["double_params"] = dict(zip(double.names, map(float, double.params)))
    result = FitResult(params=chosen.params, sigma=chosen.sigma, names=chosen.names,
                       residual_norm=chosen.residual_norm, n_iterations=chosen.n_iterations,
                       converged=chosen.converged, model_id=chosen.model_id,
                       singular=chosen.singular, gradient_norm=chosen.gradient_norm,
                       n_points=n, message=chosen.message, info=info)
    return result


def sech2_model(t, gamma_c, t_d, amplitude):
    """Mean-field burst ``amplitude * sech^2(2 pi gamma_c (t - t_d) / 4)``."""
    x = 0.5 * math.pi * gamma_c * (np.asarray(t, float) - t_d)
    return amplitude / np.cosh(x) ** 2


def _sech2_jac(t, p):
    gamma_c, t_d, amp = p
    x = 0.5 * math.pi * gamma_c * (t - t_d)
    s2 = 1.0 / np.cosh(x) ** 2
    d_dx = -2.0 * amp * s2 * np.tanh(x)
    return np.column_stack([d_dx * 0.5 * math.pi * (t - t_d),
                            -d_dx * 0.5 * math.pi * gamma_c, s2])


def _sech2_guess(t, y):
    k = int(np.argmax(y))
    peak = float(y[k])
    span = np.ptp(t)
    if 0 < k < y.size - 1:
        half = y >= 0.5 * peak
        width = max(np.ptp(t[half]), span / y.size)
        # sech^2 falls to one half at |x| = arccosh(sqrt 2)
        gamma = 4 * math.acosh(math.sqrt(2)) * 2 / (2 * math.pi * width)
        return [gamma, float(t[k]), peak]
    # monotone decay: linearize arccosh(sqrt(A / y)) = a (t - t_d) for trial A
    best = None
    good = y > 1e-3 * peak
    for ratio in (1.01, 1.1, 1.3, 1.6, 2.0, 3.0, 5.0, 10.0):
        amp = ratio * peak
        q = np.arccosh(np.sqrt(amp / y[good]))
        slope, icpt = np.polyfit(t[good], q, 1)
        if slope <= 0:
            continue
        resid = np.sum((amp / np.cosh(slope * t[good] + icpt) ** 2 - y[good]) ** 2)
        if best is None or resid < best[0]:
            best = (resid, slope, -icpt / slope, amp)
    if best is None:
        return [8.0 / (2 * math.pi * max(span, 1e-300)), float(t[0]), peak]
    _, slope, t_d, amp = best
    return [slope / (0.5 * math.pi), t_d, amp]


def fit_sech2_burst(trace, n0=None, tol=1e-13):
    """Fit the mean-field superradiant burst ``A sech^2(pi gamma_c (t - t_d) / 2)``.

    Parameters
    ----------
    trace : TimeTrace or (times, intensity)
    n0 : float, optional
        When given, ``info['gamma_sr_single'] = gamma_c / n0``.

    Returns
    -------
    FitResult
        Parameters ``gamma_c`` (Hz), ``t_d`` (s), ``amplitude``.
    """
    t, y = _trace_arrays(trace)
    t, y, _ = _xy(t, y, min_points=4)
    if not np.any(y > 0):
        raise FitError("trace has no positive maximum")
    scale = float(np.max(y))
    ys = y / scale
    guess = _sech2_guess(t, ys)

    def residual(p, _):
        return sech2_model(t, *p) - ys

    def jac(p, _):
        return _sech2_jac(t, p)

    spec = ModelSpec(residual, ("gamma_c", "t_d", "amplitude"), guess,
                     bounds=([0.0, -np.inf, 0.0], [np.inf, np.inf, np.inf]), jac=jac,
                     model_id="sech2_burst", scale=1.0)
    res = least_squares(spec, tol=tol)
    res.params[2] *= scale
    res.sigma[2] *= scale
    flags = []
    if res["t_d"] <= t[0]:
        flags.append("monotone_window")
    if int(np.argmax(y)) in (0, y.size - 1) and res["t_d"] > t[0]:
        warnings.warn("burst maximum lies at the window edge", RuntimeWarning, stacklevel=2)
    res.info["flags"] = flags
    if n0:
        res.info["gamma_sr_single"] = res["gamma_c"] / n0
    return res
