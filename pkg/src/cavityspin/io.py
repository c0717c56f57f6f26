"""Tabular and structured output.

Tables are comma-separated text with two ``#`` header lines::

    # columns: time,intensity
    # units: s,1/s
    0,1.2345678901234567e-05
    ...

Numbers are written with 17 significant digits so that they round-trip
exactly. Reports and manifests are JSON with sorted keys; non-finite floats
become the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
"""

import io as _io
import json
import math
import os

import numpy as np

__all__ = ["write_table", "read_table", "format_table", "to_jsonable", "write_json",
           "dumps_json"]


def format_table(names, units, data):
    """Render a table as text."""
    names, units = list(names), list(units)
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[1] != len(names) or len(units) != len(names):
        raise ValueError("column names, units and data disagree in width")
    for label in names + units:
        if "," in label or "\n" in label or not label:
            raise ValueError(f"invalid column label {label!r}")
    buf = _io.StringIO()
    header = f"columns: {','.join(names)}\nunits: {','.join(units)}"
    np.savetxt(buf, data, fmt="%.17g", delimiter=",", header=header, comments="# ")
    return buf.getvalue()


def write_table(path, names, units, data):
    """Write a table; the text depends only on the data."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_table(names, units, data))


def read_table(path):
    """Read a table written by :func:`write_table`.

    Returns
    -------
    names, units : list of str
    data : ndarray, shape (rows, columns)
    """
    names = units = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if body.startswith("columns:"):
                names = body[len("columns:"):].strip().split(",")
            elif body.startswith("units:"):
                units = body[len("units:"):].strip().split(",")
    if names is None or units is None:
        raise ValueError(f"{path} lacks the column and unit header")
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.size == 0:
        data = data.reshape(0, len(names))
    return names, units, data


def to_jsonable(value):
    """Convert numpy scalars, arrays and non-finite floats for JSON output."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else str(v)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(value.real), "im": to_jsonable(value.imag)}
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    return value


def dumps_json(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, obj):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(obj))
    os.replace(tmp, path)
