"""Execute validated run configurations and collect their outputs."""

from dataclasses import dataclass, field, replace as dc_replace
import math

import numpy as np

from .config import ConfigError, build_params
from .experiments import (RAMSEY_ATOL, RAMSEY_RTOL, burst_delay, crossing_time,
                          default_phase_grid, fit_s21, parallel_map, ramsey_scan, run_oat,
                          run_superradiance, s21_model)
from .experiments.spectroscopy import noise_std_for_snr
from .dynamics import DEFAULT_ATOL, DEFAULT_RTOL
from .fitting import fit_line, fit_power_law, fit_sech2_burst
from .io import read_table
from .params import derive_rates, n0_from_coupling

__all__ = ["RunOutput", "run_experiment", "point_seed"]


@dataclass
class RunOutput:
    """Everything a run emits.

    ``tables`` maps file names to ``(names, units, data)``; ``summary`` is a
    table in the same form or None; ``fits`` lists every FitResult so that
    non-convergence can be reported.
    """

    tables: dict = field(default_factory=dict)
    summary: tuple = None
    report: dict = field(default_factory=dict)
    fits: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def point_seed(seed, *index):
    """Independent 63-bit seed for one grid point."""
    state = np.random.SeedSequence([int(seed), *map(int, index)]).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1] & 0x7FFFFFFF) << 32)


def _tolerances(cfg, rel_default, abs_default):
    integ = cfg.section("integrator")
    rel = integ["rel_tol"] if integ["rel_tol"] is not None else rel_default
    abs_ = integ["abs_tol"] if integ["abs_tol"] is not None else abs_default
    return rel, abs_


def _collect_warnings(meta):
    return list(meta.get("warnings", []))


def run_superradiance_config(cfg, p):
    sec = cfg.section("superradiance")
    rel, abs_ = _tolerances(cfg, DEFAULT_RTOL, DEFAULT_ATOL)
    rates = derive_rates(p)
    thetas = sec["theta"]

    def one(theta):
        t_max = sec["t_max_s"]
        if t_max is None:
            if not rates.gamma_c > 0:
                raise ConfigError("t_max_s is required when the collective rate vanishes",
                                  "superradiance.t_max_s")
            lifetime = 4.0 / (2 * math.pi * rates.gamma_c)
            t_max = max(burst_delay(rates.gamma_c, min(theta, math.pi - sec["epsilon"])), 0.0)
            t_max += 10.0 * lifetime
        trace = run_superradiance(p, theta, t_max, n_points=sec["n_points"],
                                  epsilon=sec["epsilon"], rel_tol=rel, abs_tol=abs_,
                                  self_decay=sec["self_decay"])
        fit = fit_sech2_burst(trace, n0=p.n0) if sec["fit"] else None
        return trace, fit

    out = RunOutput()
    rows = []
    for i, (theta, (trace, fit)) in enumerate(zip(thetas, parallel_map(one, thetas, cfg.threads))):
        out.tables[f"superradiance_{i:03d}.csv"] = trace.table()
        out.warnings += _collect_warnings(trace.metadata)
        expected = burst_delay(rates.gamma_c, theta) if rates.gamma_c > 0 else math.nan
        row = [theta, float(np.max(trace.values)), expected]
        if fit is not None:
            out.fits.append(fit)
            row += [fit["gamma_c"], fit.error("gamma_c"), fit["t_d"], fit.error("t_d")]
        rows.append(row)
    names = ["theta", "peak_intensity", "t_d_expected"]
    units = ["rad", "1/s", "s"]
    if sec["fit"]:
        names += ["gamma_c_fit", "gamma_c_sigma", "t_d_fit", "t_d_sigma"]
        units += ["Hz", "Hz", "s", "s"]
    out.summary = (names, units, np.array(rows, dtype=float))
    out.report = {"fits": [f.to_dict() for f in out.fits], "gamma_c_expected": rates.gamma_c}
    return out


def run_oat_config(cfg, p):
    sec = cfg.section("oat")
    rel, abs_ = _tolerances(cfg, DEFAULT_RTOL, DEFAULT_ATOL)
    strategy = cfg.section("lineshape")["strategy"]
    cutoff = cfg.section("integrator")["coupling_cutoff"]
    phases = default_phase_grid(sec["n_phi"])
    points = [(i, j, th, tau) for i, th in enumerate(sec["theta"])
              for j, tau in enumerate(sec["tau_s"])]

    def one(pt):
        i, j, theta, tau = pt
        return run_oat(p, theta, tau, phase_grid=phases, shape=cfg.lineshape,
                       n_groups=sec["n_groups"], strategy=strategy,
                       seed=point_seed(cfg.seed, i, j), rel_tol=rel, abs_tol=abs_,
                       coupling_cutoff=cutoff)

    scans = parallel_map(one, points, cfg.threads)
    out = RunOutput()
    rows = []
    for k, ((i, j, theta, tau), scan) in enumerate(zip(points, scans)):
        out.tables[f"oat_{k:03d}.csv"] = (["phi", "p_up"], ["rad", "1"],
                                          np.column_stack([scan.phi, scan.p_up]))
        out.warnings += _collect_warnings(scan.metadata)
        out.fits.append(scan.fit)
        rows.append([theta, tau, scan.delta_phi, scan.delta_phi_sigma, scan.direct_delta_phi,
                     scan.contrast, scan.metadata["expected_delta_phi"]])
    rows = np.array(rows, dtype=float)
    out.summary = (["theta", "tau", "delta_phi", "delta_phi_sigma", "direct_delta_phi",
                    "contrast", "delta_phi_expected"],
                   ["rad", "s", "rad", "rad", "rad", "1", "rad"], rows)

    report = {"chi_n_expected": derive_rates(p).chi_n, "tau_fits": [], "theta_fits": []}
    thetas, taus = sec["theta"], sec["tau_s"]
    if len(taus) >= 2:
        for i, theta in enumerate(thetas):
            sel = rows[:, 0] == theta
            line = fit_line(rows[sel, 1], rows[sel, 2])
            scale = 2 * math.pi * math.cos(theta)
            entry = {"theta": theta, "fit": line.to_dict()}
            if abs(scale) > 1e-12:
                entry.update(chi_n=line["slope"] / scale,
                             chi_n_sigma=line.error("slope") / abs(scale))
            report["tau_fits"].append(entry)
    if len(thetas) >= 3:
        for tau in taus:
            sel = rows[:, 1] == tau
            line = fit_line(np.cos(rows[sel, 0]), rows[sel, 2])
            pred = line["slope"] * np.cos(rows[sel, 0]) + line["intercept"]
            rms = float(np.sqrt(np.mean((rows[sel, 2] - pred) ** 2)))
            report["theta_fits"].append({
                "tau": tau, "fit": line.to_dict(),
                "chi_n": line["slope"] / (2 * math.pi * tau),
                "chi_n_sigma": line.error("slope") / (2 * math.pi * tau),
                "relative_rms": rms / abs(line["slope"]) if line["slope"] else math.inf})
    report["phase_fits"] = [f.to_dict() for f in out.fits]
    out.report = report
    return out


def run_ramsey_config(cfg, p):
    sec = cfg.section("ramsey")
    rel, abs_ = _tolerances(cfg, RAMSEY_RTOL, RAMSEY_ATOL)
    chis = sec["chi_n_hz"]
    tau = None if sec["tau_s"] is None else np.asarray(sec["tau_s"], dtype=float)
    base = p
    if chis is None:
        chis = [derive_rates(p).chi_n]
    kwargs = dict(n_groups=sec["n_groups"], tau_grid=tau,
                  strategy=cfg.section("lineshape")["strategy"], seed=point_seed(cfg.seed, 0),
                  rel_tol=rel, abs_tol=abs_,
                  coupling_cutoff=cfg.section("integrator")["coupling_cutoff"],
                  check_convergence=sec["check_convergence"])
    if sec["chi_n_hz"] is None:
        traces, fits = ramsey_scan_fixed(base, cfg, kwargs)
    else:
        traces, fits = ramsey_scan(base, chis, shape=cfg.lineshape, threads=cfg.threads, **kwargs)
    out = RunOutput()
    rows = []
    for k, (chi, trace, fit) in enumerate(zip(chis, traces, fits)):
        out.tables[f"ramsey_{k:03d}.csv"] = trace.table()
        out.warnings += _collect_warnings(trace.metadata)
        out.fits.append(fit)
        rows.append([chi, fit.info["t2_star"], fit.info["t2_star_sigma"],
                     crossing_time(trace.times, trace.values),
                     1.0 if fit.info["selected"] == "single" else 2.0,
                     fit.info["delta_aicc"] if fit.info["delta_aicc"] is not None else math.nan])
    out.summary = (["chi_n", "t2_star", "t2_star_sigma", "t2_star_interp", "n_components",
                    "delta_aicc"], ["Hz", "s", "s", "s", "1", "1"], np.array(rows, dtype=float))
    out.report = {"fits": [f.to_dict() for f in fits],
                  "lineshape": None if cfg.lineshape is None else cfg.lineshape.to_dict()}
    return out


def ramsey_scan_fixed(p, cfg, kwargs):
    """Single Ramsey run at the configured parameters."""
    from .experiments import run_ramsey
    from .fitting import fit_exponential_family

    trace = run_ramsey(p, shape=cfg.lineshape, **kwargs)
    return [trace], [fit_exponential_family(trace)]


def run_s21_config(cfg, p):
    sec = cfg.section("s21")
    f_c = sec["omega_c_hz"]
    f_s = f_c - p.delta
    out = RunOutput()
    if sec["data_file"] is not None:
        try:
            names, _, table = read_table(sec["data_file"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read spectrum: {exc}", "s21.data_file") from exc
        if {"frequency", "re", "im"} <= set(names):
            f = table[:, names.index("frequency")]
            y = table[:, names.index("re")] + 1j * table[:, names.index("im")]
        elif {"frequency", "power"} <= set(names):
            f = table[:, names.index("frequency")]
            y = table[:, names.index("power")]
        else:
            raise ConfigError("spectrum needs frequency with re/im or power columns",
                              "s21.data_file")
    else:
        f = np.linspace(f_s - sec["span_hz"] / 2, f_s + sec["span_hz"] / 2, sec["n_points"])
        y = s21_model(f, p, f_c)
        if sec["snr_db"] is not None:
            rng = np.random.default_rng(point_seed(cfg.seed, 0))
            sd = noise_std_for_snr(y, sec["snr_db"]) / math.sqrt(2.0)
            y = y + sd * (rng.standard_normal(f.size) + 1j * rng.standard_normal(f.size))
        if sec["data"] == "power":
            y = np.abs(y) ** 2
    if np.iscomplexobj(y):
        cols = (["frequency", "re", "im", "power"], ["Hz", "1", "1", "1"],
                [f, y.real, y.imag, np.abs(y) ** 2])
    else:
        cols = (["frequency", "power"], ["Hz", "1"], [f, y])
    report = {"omega_c": f_c, "omega_s": f_s}
    if sec["mode"] == "fit":
        fit = fit_s21(f, y, p.kappa, p.delta, f_c, kappa_out=p.kappa_out)
        out.fits.append(fit)
        model_cols = _s21_fitted(fit, f, p, f_c)
        names, units, data = cols
        if np.iscomplexobj(model_cols):
            names = names + ["model_re", "model_im"]
            units = units + ["1", "1"]
            data = data + [model_cols.real, model_cols.imag]
        else:
            names, units, data = names + ["model_power"], units + ["1"], data + [model_cols]
        cols = (names, units, data)
        report["fit"] = fit.to_dict()
        report["g_coll_true"] = p.g_coll
        if cfg.raw.get("params", {}).get("g_hz") is not None and fit["g_coll"] > 0:
            report["n0_from_fit"] = n0_from_coupling(fit["g_coll"], p.g)
    out.tables["s21_spectrum.csv"] = (cols[0], cols[1], np.column_stack(cols[2]))
    out.report = report
    return out


def _s21_fitted(fit, f, p, f_c):
    from .experiments.spectroscopy import _s21

    s = _s21(f, fit.info["g_coll_sq"], fit["gamma_inh"], p.kappa, fit.info["kappa_out"], f_c,
             f_c - p.delta)
    if fit.info["data"] == "power":
        return fit["amplitude"] * np.abs(s) ** 2 + fit["baseline"]
    return (fit["amplitude_re"] + 1j * fit["amplitude_im"]) * s + (
        fit["baseline_re"] + 1j * fit["baseline_im"])


RUNNERS = {
    "superradiance": run_superradiance_config,
    "oat": run_oat_config,
    "ramsey": run_ramsey_config,
    "s21": run_s21_config,
}


def _sweep_params(cfg, parameter, value):
    if parameter == "chi_n_hz":
        try:
            return cfg.params.with_chi_n(value)
        except ValueError as exc:
            raise ConfigError(str(exc), "sweep.values") from exc
    section = dict(cfg.section("params"))
    section[parameter] = value
    if parameter == "g_coll_hz" and section["g_hz"] is not None and section["n0"] is not None:
        section["n0"] = None
    return build_params(section)


def run_sweep_config(cfg):
    sw = cfg.section("sweep")
    kind, parameter, values = sw["experiment"], sw["parameter"], sw["values"]
    params = [_sweep_params(cfg, parameter, v) for v in values]
    out = RunOutput()
    rows, names, units = [], None, None
    reports = []
    for i, (v, p) in enumerate(zip(values, params)):
        sub_cfg = dc_replace(cfg, params=p)
        if cfg.lineshape is not None and cfg.section("lineshape")["fwhm_hz"] is None:
            sub_cfg.lineshape = dc_replace(cfg.lineshape, fwhm=p.gamma_inh)
        sub = RUNNERS[kind](sub_cfg, p)
        for name, table in sub.tables.items():
            out.tables[f"sweep_{i:03d}_{name}"] = table
        out.fits += sub.fits
        out.warnings += sub.warnings
        reports.append({"value": v, "report": sub.report})
        if sub.summary is not None:
            names, units, data = sub.summary
            data = np.atleast_2d(data)
            rows.append(np.column_stack([np.full(data.shape[0], v), data]))
    unit = "1" if parameter == "n0" else "Hz"
    if rows:
        out.summary = ([parameter.removesuffix("_hz")] + names, [unit] + units,
                       np.vstack(rows))
    report = {"experiment": kind, "parameter": parameter, "points": reports}
    if kind == "superradiance" and parameter == "n0" and len(values) >= 2 and rows:
        table = np.vstack(rows)
        n0 = table[:, 0]
        report["peak_power_law"] = fit_power_law(n0, table[:, 2]).to_dict()
        if "gamma_c_fit" in names:
            report["gamma_c_line"] = fit_line(n0, table[:, 1 + names.index("gamma_c_fit")]).to_dict()
    out.report = report
    return out


def run_experiment(cfg, command):
    """Run ``command`` for a validated configuration."""
    if command == "sweep":
        return run_sweep_config(cfg)
    return RUNNERS[command](cfg, cfg.params)
