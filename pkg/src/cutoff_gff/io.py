"""Config parsing and deterministic report serialization."""
from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile

import numpy as np

from .errors import ConfigurationError
from .spectral import CutoffSpec, Field, Geometry

__all__ = [
    "CONFIG_SCHEMA",
    "load_config",
    "validate_config",
    "geometry_from_config",
    "cutoff_from_config",
    "to_jsonable",
    "dumps_json",
    "write_text_atomic",
    "write_json",
    "csv_text",
    "field_to_dict",
    "field_csv_rows",
    "spectrum_rows",
]

# Allowed keys per section; a nested dict describes a subsection.
CONFIG_SCHEMA = {
    "command": None,
    "seed": None,
    "geometry": {
        "kind": None,
        "points": None,
        "extent": None,
        "dim": None,
        "time_extent": None,
        "slice_points": None,
        "reflection_axis": None,
    },
    "cutoff": {"lambda": None, "kind": None, "width": None},
    "sample": {"num_samples": None},
    "witness": {
        "kind": None,
        "center": None,
        "width": None,
        "derivative_order_cap": None,
        "points_per_width": None,
        "support_radius": None,
        "rho_core": None,
        "rho_support": None,
        "max_residual": None,
    },
    "rp_check": {"kernel": None, "widths": None, "include_witness": None, "tolerance": None},
    "markov": {"graph": None, "nodes": None, "mass": None, "region": None, "tolerance": None},
    "phi4": {
        "couplings": None,
        "counterterm": None,
        "num_samples": None,
        "rho_core": None,
        "rho_support": None,
    },
}


def validate_config(doc, schema=CONFIG_SCHEMA, prefix=""):
    if not isinstance(doc, dict):
        raise ConfigurationError("expected a JSON object", prefix.rstrip(".") or "<root>")
    for key, value in doc.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigurationError("unknown key", path)
        if isinstance(schema[key], dict):
            validate_config(value, schema[key], path + ".")
    return doc


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file {path!r} not found", "--config") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON ({exc.msg} at line {exc.lineno})", "--config") from None
    return validate_config(doc)


def _number(section, key, default, cast=float, prefix=""):
    value = section.get(key, default)
    try:
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"expected a number, got {value!r}", prefix + key) from None


def geometry_from_config(doc):
    geo = doc.get("geometry")
    if geo is None:
        raise ConfigurationError("missing section", "geometry")
    kind = geo.get("kind")
    points = geo.get("points")
    axis = _number(geo, "reflection_axis", 0, int, "geometry.")
    try:
        if kind == "circle":
            return Geometry.circle(_number(geo, "points", None, int, "geometry."))
        if kind == "torus":
            if not isinstance(points, list):
                raise ConfigurationError("torus needs a list of points per axis", "geometry.points")
            return Geometry.torus([int(p) for p in points], reflection_axis=axis)
        if kind == "periodic_grid":
            dim = _number(geo, "dim", 1, int, "geometry.")
            extent = _number(geo, "extent", None, float, "geometry.")
            return Geometry.periodic_grid(dim, extent, _number(geo, "points", None, int, "geometry."), reflection_axis=axis)
        if kind == "cylinder":
            return Geometry.cylinder(
                _number(geo, "points", None, int, "geometry."),
                _number(geo, "time_extent", 4 * np.pi, float, "geometry."),
                _number(geo, "slice_points", 32, int, "geometry."),
            )
    except ConfigurationError as exc:
        if exc.key is None or not str(exc.key).startswith("geometry"):
            raise ConfigurationError(str(exc), "geometry") from None
        raise
    raise ConfigurationError(f"unsupported geometry kind {kind!r}", "geometry.kind")


def cutoff_from_config(doc, required=True):
    cut = doc.get("cutoff")
    if cut is None:
        if required:
            raise ConfigurationError("missing section", "cutoff")
        return None
    if "lambda" not in cut:
        raise ConfigurationError("missing key", "cutoff.lambda")
    try:
        return CutoffSpec(
            _number(cut, "lambda", None, float, "cutoff."),
            cut.get("kind", "sharp"),
            _number(cut, "width", 0.25, float, "cutoff."),
        )
    except ConfigurationError as exc:
        if exc.key is None:
            raise ConfigurationError(str(exc), "cutoff") from None
        raise


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_json(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_text_atomic(path, text):
    """Write via a temporary file in the same directory and rename over ``path``."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    write_text_atomic(path, dumps_json(obj))


def csv_text(rows, header=None):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def field_to_dict(field: Field):
    b = field.basis
    return {
        "geometry": b.geometry.to_dict(),
        "coefficients": field.coeffs,
        "eigenvalues": b.eigenvalues,
        "parity": b.parity,
    }


def field_csv_rows(field: Field):
    """Header and rows (node coordinates..., value)."""
    g = field.geometry
    coords = [c.ravel() for c in g.coordinates()]
    header = [f"x{i}" for i in range(g.dim)] + ["value"]
    rows = zip(*coords, field.values.ravel())
    return header, [[float(v) for v in row] for row in rows]


def spectrum_rows(basis, multiplier=None):
    header = ["index", "eigenvalue", "parity"] + ([] if multiplier is None else ["multiplier"])
    rows = []
    for k in range(basis.n_modes):
        row = [k, float(basis.eigenvalues[k]), int(basis.parity[k])]
        if multiplier is not None:
            row.append(float(multiplier[k]))
        rows.append(row)
    return header, rows
