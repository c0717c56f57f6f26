"""Command-line interface.

Every invocation writes ``manifest.json`` to the output directory, whether
it succeeds or not. Successful experiment runs also write CSV tables,
``summary.csv`` and ``report.json``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 fit non-convergence.
"""

import argparse
from dataclasses import replace
import datetime as _dt
import json
import os
import platform
import sys
import time
import warnings

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, load_config
from .dynamics import IntegrationError
from .fitting import FitError
from .io import dumps_json, write_json, write_table
from .params import ParameterError, derive_rates

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_NUMERICAL", "EXIT_FIT"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_FIT = 4

COMMANDS = ("params", "superradiance", "oat", "ramsey", "s21", "sweep")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cavityspin",
        description="Mean-field simulations and fits for cavity-coupled spin ensembles.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "params": "print the derived interaction rates",
        "superradiance": "emission traces after a global rotation",
        "oat": "echo phase-shift scans",
        "ramsey": "Ramsey coherence and T2* fits",
        "s21": "cavity transmission model or fit",
        "sweep": "repeat an experiment over a parameter grid",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--out", help="output directory (default: output_dir from the config)")
        p.add_argument("--seed", type=int, help="unsigned 64-bit seed overriding the config")
        p.add_argument("--threads", type=int, help="worker threads for independent grid points")
        p.add_argument("--tol", type=float, help="relative integration tolerance")
    return parser


def _apply_overrides(cfg, args):
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("must be an unsigned 64-bit integer", "--seed")
        cfg = replace(cfg, seed=args.seed)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("must be at least 1", "--threads")
        cfg = replace(cfg, threads=args.threads)
    if args.tol is not None:
        if not args.tol > 0:
            raise ConfigError("must be positive", "--tol")
        sections = dict(cfg.sections)
        sections["integrator"] = dict(sections["integrator"], rel_tol=args.tol)
        cfg = replace(cfg, sections=sections)
    if args.out is not None:
        cfg = replace(cfg, output_dir=args.out)
    return cfg


def _error_record(exc, code):
    return {"type": type(exc).__name__, "message": str(exc), "exit_code": code,
            "key": getattr(exc, "key", None)}


def _classify(exc):
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, FitError):
        return EXIT_FIT
    return EXIT_NUMERICAL


def _execute(cfg, command, out_dir):
    from .runner import run_experiment

    files = []
    report = {"command": command}
    if command == "params":
        rates = derive_rates(cfg.params)
        report.update(params=cfg.params.to_dict(), rates=rates.to_dict())
        names = ["chi", "gamma_sr_single", "chi_n", "gamma_c", "gap", "g_coll"]
        write_table(os.path.join(out_dir, "rates.csv"), names, ["Hz"] * len(names),
                    np.array([[rates.to_dict()[k] for k in names]]))
        files.append("rates.csv")
        print(dumps_json(rates.to_dict()), end="")
        fits = []
    else:
        result = run_experiment(cfg, command)
        for name in sorted(result.tables):
            names, units, data = result.tables[name]
            write_table(os.path.join(out_dir, name), names, units, data)
            files.append(name)
        if result.summary is not None:
            write_table(os.path.join(out_dir, "summary.csv"), *result.summary)
            files.append("summary.csv")
        report.update(result.report)
        fits = result.fits
        report["warnings"] = sorted(set(result.warnings))
    write_json(os.path.join(out_dir, "report.json"), report)
    files.append("report.json")
    failed = [f.model_id for f in fits if f is not None and not f.converged
              and "no_decay" not in f.info.get("flags", [])]
    return files, failed


def main(argv=None):
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    started = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    out_dir = args.out or "out"
    manifest = {
        "command": args.command,
        "tool": {"name": "cavityspin", "version": __version__},
        "environment": {"python": platform.python_version(), "numpy": np.__version__,
                        "scipy": scipy.__version__},
        "started_utc": started,
        "config": None,
        "derived_rates": None,
        "files": [],
        "warnings": [],
        "error": None,
    }
    code = EXIT_OK
    caught = []
    try:
        cfg = load_config(args.config, command=args.command)
        cfg = _apply_overrides(cfg, args)
        out_dir = cfg.output_dir
        manifest["config"] = cfg.snapshot()
        manifest["derived_rates"] = derive_rates(cfg.params).to_dict()
        os.makedirs(out_dir, exist_ok=True)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            files, failed = _execute(cfg, args.command, out_dir)
        manifest["files"] = files
        if failed:
            code = EXIT_FIT
            manifest["error"] = {"type": "FitNotConverged", "exit_code": code, "key": None,
                                 "message": f"fits did not converge: {sorted(set(failed))}"}
    except (ConfigError, ParameterError, FitError, IntegrationError, FloatingPointError,
            ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        code = _classify(exc)
        if isinstance(exc, ParameterError) and manifest["config"] is None:
            code = EXIT_CONFIG
        manifest["error"] = _error_record(exc, code)
    manifest["warnings"] = sorted({str(w.message) for w in caught})
    manifest["status"] = "ok" if code == EXIT_OK else "error"
    manifest["exit_code"] = code
    manifest["wall_time_s"] = time.perf_counter() - start
    try:
        os.makedirs(out_dir, exist_ok=True)
        write_json(os.path.join(out_dir, "manifest.json"), manifest)
    except OSError as exc:
        print(f"cannot write manifest to {out_dir}: {exc}", file=sys.stderr)
    if manifest["error"] is not None:
        print(json.dumps(manifest["error"], sort_keys=True), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
