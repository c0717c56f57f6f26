"""Run configuration: strict TOML schema, defaults and validation.

All defaults live in :data:`SCHEMA`. Frequencies use ``_hz`` keys, times
``_s`` keys and angles are in radians. A grid is either a list of numbers or
a table ``{start, stop, num, spacing}`` with ``spacing`` ``"linear"`` or
``"log"``.
"""

from dataclasses import dataclass, field
import math
import sys

import numpy as np

from .lineshape import Lineshape
from .params import DEFAULT_T2, ParameterError, PhysicalParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ConfigError", "RunConfig", "SCHEMA", "EXPERIMENTS", "parse_config", "load_config",
           "build_params", "build_lineshape", "resolve_grid"]

EXPERIMENTS = ("superradiance", "oat", "ramsey", "s21")
REQUIRED = object()
GRID = "grid"


class ConfigError(ValueError):
    """Schema or validation failure, carrying the offending key path."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


# section -> key -> (type, default)
SCHEMA = {
    "": {
        "seed": (int, 0),
        "threads": (int, 1),
        "output_dir": (str, "out"),
    },
    "params": {
        "kappa_hz": (float, REQUIRED),
        "g_coll_hz": (float, None),
        "g_hz": (float, None),
        "n0": (float, None),
        "delta_hz": (float, 0.0),
        "gamma_inh_hz": (float, 0.0),
        "gamma_2_hz": (float, 1.0 / (math.pi * DEFAULT_T2)),
        "kappa_out_hz": (float, None),
    },
    "lineshape": {
        "kind": (str, "pseudo_voigt"),
        "fwhm_hz": (float, None),
        "lorentzian_fraction": (float, 0.3),
        "strategy": (str, "quantile"),
    },
    "integrator": {
        "rel_tol": (float, None),
        "abs_tol": (float, None),
        "coupling_cutoff": (float, 20.0),
    },
    "superradiance": {
        "theta": (GRID, REQUIRED),
        "t_max_s": (float, None),
        "n_points": (int, 2001),
        "epsilon": (float, 1e-3),
        "self_decay": (bool, True),
        "fit": (bool, True),
    },
    "oat": {
        "theta": (GRID, REQUIRED),
        "tau_s": (GRID, REQUIRED),
        "n_phi": (int, 16),
        "n_groups": (int, 10_000),
    },
    "ramsey": {
        "chi_n_hz": (GRID, None),
        "tau_s": (GRID, None),
        "n_groups": (int, 10_000),
        "check_convergence": (bool, False),
    },
    "s21": {
        "mode": (str, "fit"),
        "omega_c_hz": (float, REQUIRED),
        "span_hz": (float, 3e6),
        "n_points": (int, 1201),
        "snr_db": (float, None),
        "data": (str, "complex"),
        "data_file": (str, None),
    },
    "sweep": {
        "experiment": (str, REQUIRED),
        "parameter": (str, REQUIRED),
        "values": (GRID, REQUIRED),
    },
}

SWEEPABLE = ("g_coll_hz", "g_hz", "n0", "delta_hz", "gamma_inh_hz", "gamma_2_hz",
             "kappa_hz", "kappa_out_hz", "chi_n_hz")


@dataclass
class RunConfig:
    """Validated configuration for one run.

    ``sections`` holds every schema section with defaults filled in;
    ``experiment`` names the single experiment table present.
    """

    experiment: str
    params: PhysicalParams
    lineshape: object
    sections: dict
    seed: int = 0
    threads: int = 1
    output_dir: str = "out"
    source: str = None
    raw: dict = field(default_factory=dict)

    def section(self, name):
        return self.sections.get(name, {})

    def snapshot(self):
        """Plain-data copy of the resolved configuration."""
        return {"experiment": self.experiment, "seed": self.seed, "threads": self.threads,
                "output_dir": self.output_dir, "source": self.source,
                "sections": self.sections}


def _type_name(kind):
    return {float: "number", int: "integer", str: "string", bool: "boolean",
            GRID: "list of numbers or {start, stop, num, spacing} table"}[kind]


def _check_value(kind, value, key):
    if kind is GRID:
        return _check_grid(value, key)
    ok = {
        float: isinstance(value, (int, float)) and not isinstance(value, bool),
        int: isinstance(value, int) and not isinstance(value, bool),
        str: isinstance(value, str),
        bool: isinstance(value, bool),
    }[kind]
    if not ok:
        raise ConfigError(f"expected {_type_name(kind)}, got {type(value).__name__} {value!r}",
                          key)
    if kind is float:
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError("must be finite", key)
    return value


def _check_grid(value, key):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if isinstance(value, list):
        for i, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"entry {i} is not a finite number", key)
        if not value:
            raise ConfigError("grid is empty", key)
        return [float(v) for v in value]
    if isinstance(value, dict):
        allowed = {"start": float, "stop": float, "num": int, "spacing": str}
        for k in value:
            if k not in allowed:
                raise ConfigError(f"unknown grid key {k!r}", f"{key}.{k}")
        for k in ("start", "stop", "num"):
            if k not in value:
                raise ConfigError("missing required grid key", f"{key}.{k}")
        spec = {k: _check_value(allowed[k], v, f"{key}.{k}") for k, v in value.items()}
        spec.setdefault("spacing", "linear")
        if spec["num"] < 1:
            raise ConfigError("grid is empty", f"{key}.num")
        if spec["spacing"] not in ("linear", "log"):
            raise ConfigError("expected 'linear' or 'log'", f"{key}.spacing")
        if spec["spacing"] == "log" and not (spec["start"] > 0 and spec["stop"] > 0):
            raise ConfigError("log grids need positive end points", key)
        return resolve_grid(spec)
    raise ConfigError(f"expected {_type_name(GRID)}", key)


def resolve_grid(spec):
    """Expand a grid table into a list of floats."""
    if isinstance(spec, list):
        return spec
    if spec["spacing"] == "log":
        pts = np.logspace(math.log10(spec["start"]), math.log10(spec["stop"]), spec["num"])
    else:
        pts = np.linspace(spec["start"], spec["stop"], spec["num"])
    return [float(x) for x in pts]


def _section(name, table, path):
    schema = SCHEMA[name]
    if not isinstance(table, dict):
        raise ConfigError("expected a table", path or None)
    out = {}
    for key, value in table.items():
        full = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown key; allowed keys are {sorted(schema)}", full)
        out[key] = _check_value(schema[key][0], value, full)
    for key, (_, default) in schema.items():
        if key not in out:
            if default is REQUIRED:
                raise ConfigError("missing required key", f"{path}.{key}" if path else key)
            out[key] = default
    return out


def build_params(section):
    """PhysicalParams from a validated ``params`` section."""
    g_coll, g, n0 = section["g_coll_hz"], section["g_hz"], section["n0"]
    common = dict(kappa=section["kappa_hz"], delta=section["delta_hz"],
                  gamma_inh=section["gamma_inh_hz"], gamma_2=section["gamma_2_hz"],
                  kappa_out=section["kappa_out_hz"])
    try:
        if g_coll is not None:
            if g is not None and n0 is not None:
                raise ConfigError("give at most two of g_coll_hz, g_hz and n0", "params")
            if n0 is not None:
                if not n0 > 0:
                    raise ConfigError("must be positive", "params.n0")
                return PhysicalParams(g=g_coll / math.sqrt(n0), n0=n0, **common)
            kappa, delta = common.pop("kappa"), common.pop("delta")
            return PhysicalParams.from_collective(g_coll, kappa, delta, g=g, **common)
        if g is None:
            raise ConfigError("either g_coll_hz or g_hz is required", "params")
        return PhysicalParams(g=g, n0=1.0 if n0 is None else n0, **common)
    except ParameterError as exc:
        raise ConfigError(f"invalid physical parameters: {exc}", "params") from exc


def build_lineshape(section, params, present):
    """Lineshape from the ``lineshape`` section, or None when it is absent."""
    if not present:
        return None
    fwhm = section["fwhm_hz"] if section["fwhm_hz"] is not None else params.gamma_inh
    try:
        return Lineshape(section["kind"], fwhm, section["lorentzian_fraction"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), "lineshape") from exc


def parse_config(data, source=None, command=None):
    """Validate a configuration mapping.

    Parameters
    ----------
    data : dict
        Parsed TOML document.
    source : str, optional
        File the data came from, recorded in the snapshot.
    command : str, optional
        Subcommand; checked against the experiment tables present.

    Returns
    -------
    RunConfig
    """
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    tables = {k for k, v in data.items() if isinstance(v, dict)}
    for key in data:
        if key not in SCHEMA and key not in SCHEMA[""]:
            raise ConfigError(f"unknown key; allowed sections are {sorted(k for k in SCHEMA if k)}"
                              f" and top-level keys {sorted(SCHEMA[''])}", key)
    top = _section("", {k: v for k, v in data.items() if k in SCHEMA[""]}, "")
    if top["threads"] < 1:
        raise ConfigError("must be at least 1", "threads")
    if top["seed"] < 0 or top["seed"] >= 2 ** 64:
        raise ConfigError("must be an unsigned 64-bit integer", "seed")
    if "params" not in tables:
        raise ConfigError("missing required section", "params")

    sections = {}
    for name in SCHEMA:
        if name and name in data:
            sections[name] = _section(name, data[name], name)
    for name in ("lineshape", "integrator"):
        sections.setdefault(name, _section(name, {}, name))

    kinds = [k for k in EXPERIMENTS if k in sections]
    if len(kinds) > 1:
        raise ConfigError(f"exactly one experiment table is allowed, found {kinds}")
    experiment = kinds[0] if kinds else None
    if "sweep" in sections:
        sw = sections["sweep"]
        if sw["experiment"] not in EXPERIMENTS:
            raise ConfigError(f"expected one of {list(EXPERIMENTS)}", "sweep.experiment")
        if sw["experiment"] != experiment:
            raise ConfigError(f"sweep targets {sw['experiment']!r} but the config has no "
                              f"[{sw['experiment']}] table", "sweep.experiment")
        if sw["parameter"] not in SWEEPABLE:
            raise ConfigError(f"expected one of {list(SWEEPABLE)}", "sweep.parameter")
    if command is not None and command != "params":
        if command == "sweep":
            if "sweep" not in sections:
                raise ConfigError("the sweep command needs a [sweep] table")
        elif experiment != command:
            raise ConfigError(f"the {command} command needs a [{command}] table")
        elif "sweep" in sections:
            raise ConfigError("a [sweep] table is only valid with the sweep command")

    params = build_params(sections["params"])
    ls = sections["lineshape"]
    if ls["strategy"] not in ("quantile", "random"):
        raise ConfigError("expected 'quantile' or 'random'", "lineshape.strategy")
    shape = build_lineshape(ls, params, "lineshape" in data)
    s21 = sections.get("s21")
    if s21 is not None:
        if s21["mode"] not in ("model", "fit"):
            raise ConfigError("expected 'model' or 'fit'", "s21.mode")
        if s21["data"] not in ("complex", "power"):
            raise ConfigError("expected 'complex' or 'power'", "s21.data")
        if s21["n_points"] < 8:
            raise ConfigError("must be at least 8", "s21.n_points")
        if not s21["span_hz"] > 0:
            raise ConfigError("must be positive", "s21.span_hz")
    for name, key in (("oat", "n_groups"), ("ramsey", "n_groups")):
        if name in sections and sections[name][key] < 1:
            raise ConfigError("must be positive", f"{name}.{key}")
    if "oat" in sections and sections["oat"]["n_phi"] < 8:
        raise ConfigError("a phase scan needs at least 8 points", "oat.n_phi")
    if "superradiance" in sections and sections["superradiance"]["n_points"] < 4:
        raise ConfigError("must be at least 4", "superradiance.n_points")
    integ = sections["integrator"]
    for key in ("rel_tol", "abs_tol"):
        if integ[key] is not None and not integ[key] > 0:
            raise ConfigError("must be positive", f"integrator.{key}")

    return RunConfig(experiment=experiment, params=params, lineshape=shape, sections=sections,
                     seed=top["seed"], threads=top["threads"], output_dir=top["output_dir"],
                     source=source, raw=data)


def load_config(path, command=None):
    """Read and validate a TOML configuration file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"configuration file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return parse_config(data, source=str(path), command=command)
