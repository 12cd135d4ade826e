"""Structured config files and text formats for specs, models and stiffness matrices.

Configs are YAML (JSON is a YAML subset, so ``.json`` files load too).
Every text output can carry a provenance header with the tool version and
a hash of the config that produced it; wall-clock timestamps go to a
sidecar file so that file bodies stay reproducible.
"""
from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .errors import InvalidSpec
from .geometry import NestedLatticeSpec, NestingOrderSpec, Segment, StrutModel
from .homogenize import MaterialSpec, StiffnessMatrix


def load_config(path):
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise InvalidSpec(f"{path}: expected a mapping at the top level")
    return data


def dump_config(data, path):
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=False)


def config_hash(data):
    """Short stable hash of a config mapping (key order does not matter)."""
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def provenance_lines(config=None, prefix="# "):
    lines = [f"{prefix}nestlattice {__version__}"]
    if config is not None:
        lines.append(f"{prefix}config_hash {config_hash(config)}")
    return lines


def write_sidecar(path, **extra):
    """Write ``<path>.meta.json`` holding the timestamp and any extra run info."""
    meta = {"created": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "version": __version__, **extra}
    side = Path(str(path) + ".meta.json")
    side.write_text(json.dumps(meta, indent=2, default=str) + "\n")
    return side


# ---- specs ----------------------------------------------------------------

def spec_to_dict(spec):
    return {
        "name": spec.name,
        "cell_size_mm": spec.cell_size_mm,
        "spacing_mm": list(spec.spacing_mm),
        "orientation_axis": spec.orientation_axis,
        "orders": [{"index": o.index, "orientation_deg": o.orientation_deg,
                    "diameter_mm": o.diameter_mm} for o in spec.orders],
    }


def spec_from_dict(data):
    known = {"name", "cell_size_mm", "spacing_mm", "orientation_axis", "orders"}
    extra = set(data) - known
    if extra:
        raise InvalidSpec(f"unknown spec keys: {sorted(extra)}")
    try:
        orders = tuple(NestingOrderSpec(int(o["index"]), float(o.get("orientation_deg", 0.0)),
                                        float(o.get("diameter_mm", 0.8)))
                       for o in data["orders"])
    except (KeyError, TypeError) as exc:
        raise InvalidSpec(f"malformed orders table: {exc}") from exc
    spacing = data.get("spacing_mm", [1.81, 1.81])
    if np.isscalar(spacing):
        spacing = [spacing] * max(1, max(o.index for o in orders))
    return NestedLatticeSpec(float(data.get("cell_size_mm", 8.75)), tuple(spacing), orders,
                             data.get("orientation_axis", "Z"), data.get("name", ""))


def read_spec(path):
    return spec_from_dict(load_config(path))


def write_spec(spec, path):
    dump_config(spec_to_dict(spec), path)


def material_from_value(value):
    """Material from a mapping, an ``"E,nu"`` string or ``None`` (defaults)."""
    if value is None:
        return MaterialSpec()
    if isinstance(value, MaterialSpec):
        return value
    if isinstance(value, str):
        parts = [float(p) for p in value.split(",")]
        if len(parts) not in (2, 3):
            raise InvalidSpec("material must be given as E,nu or E,nu,void_contrast")
        return MaterialSpec(*parts)
    return MaterialSpec(**value)


def material_to_dict(mat):
    return {"youngs_modulus_gpa": mat.youngs_modulus_gpa, "poisson_ratio": mat.poisson_ratio,
            "void_contrast": mat.void_contrast}


# ---- strut models ---------------------------------------------------------

def write_model(model, path, config=None):
    """One segment per line, ``ax ay az bx by bz r`` in mm with 9 significant digits."""
    with open(path, "w") as fh:
        for line in provenance_lines(config):
            fh.write(line + "\n")
        fh.write(f"# cell_size_mm {model.cell_size_mm:.9g}\n")
        if model.spec is not None and model.spec.name:
            fh.write(f"# name {model.spec.name}\n")
        for s in model.segments:
            vals = (*s.endpoint_a, *s.endpoint_b, s.radius_mm)
            fh.write(" ".join(f"{v:.9g}" for v in vals) + "\n")


def read_model(path, cell_size_mm=None):
    segs = []
    L0 = cell_size_mm
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "cell_size_mm" and L0 is None:
                    L0 = float(parts[1])
                continue
            vals = line.split()
            if len(vals) != 7:
                raise InvalidSpec(f"{path}:{ln}: expected 7 numbers, got {len(vals)}")
            v = [float(x) for x in vals]
            segs.append(Segment(v[0:3], v[3:6], v[6]))
    if L0 is None:
        raise InvalidSpec(f"{path}: cell size missing (no '# cell_size_mm' header)")
    return StrutModel(L0, segs)


# ---- stiffness --------------------------------------------------------------

def write_stiffness(stiffness, path, config=None):
    """6x6 block (row-major, GPa, 9 significant digits) plus ``<path>.json`` metadata."""
    with open(path, "w") as fh:
        for line in provenance_lines(config):
            fh.write(line + "\n")
        for row in stiffness.c:
            fh.write(" ".join(f"{v:.9g}" for v in row) + "\n")
    meta = dict(stiffness.metadata)
    meta["asymmetry"] = stiffness.asymmetry
    Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_stiffness(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.strip() and not line.startswith("#"):
                rows.append([float(x) for x in line.split()])
    c = np.array(rows)
    if c.shape != (6, 6):
        raise InvalidSpec(f"{path}: expected a 6x6 block, got shape {c.shape}")
    meta_path = Path(str(path) + ".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return StiffnessMatrix(c, float(meta.get("asymmetry", 0.0)), meta)


# ---- reports ----------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def csv_line(values):
    return ",".join(_fmt(v) for v in values)


def write_report(report, path, config=None):
    """Report as a JSON record (``.json``) or a header + one CSV row (anything else)."""
    path = Path(path)
    if path.suffix == ".json":
        rec = {"provenance": {"version": __version__}, **report.to_dict()}
        if config is not None:
            rec["provenance"]["config_hash"] = config_hash(config)
        path.write_text(json.dumps(rec, indent=2, sort_keys=True, default=str) + "\n")
        return
    with open(path, "w") as fh:
        for line in provenance_lines(config):
            fh.write(line + "\n")
        fh.write(",".join(report.CSV_COLUMNS) + "\n")
        fh.write(csv_line(report.csv_row()) + "\n")
