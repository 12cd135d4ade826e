"""End-to-end pipelines, parameter sweeps and density-targeted diameter search."""
from __future__ import annotations

import itertools
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analysis import analyze
from .errors import InvalidSpec, LatticeError, Unbracketed
from .geometry import NestedLatticeSpec, Segment, StrutModel, build_base, t4fas_fold
from .homogenize import DEFAULT_STRAIN, DEFAULT_TOL, MaterialSpec, homogenize
from .voxel import geometric_metrics, relative_density, voxelize

log = logging.getLogger(__name__)

DEFAULT_SWEEP_RESOLUTION = 48
STAGES = ("build_base", "t4fas_fold", "voxelize", "metrics", "homogenize", "analyze")

_SCALAR = re.compile(r"^(d|theta|spacing)(\d+)$")
_RATIO = re.compile(r"^d(\d+)/d(\d+)$")


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except LatticeError as exc:
        raise exc.with_stage(name)
    except (ValueError, ArithmeticError) as exc:
        raise LatticeError(f"{type(exc).__name__}: {exc}").with_stage(name) from exc


def run_pipeline(spec, resolution=DEFAULT_SWEEP_RESOLUTION, material=None,
                 strain_magnitude=DEFAULT_STRAIN, tol=DEFAULT_TOL, bc="kinematic"):
    """Spec (or ready-made StrutModel) to AnisotropyReport.

    Errors from any step are re-raised with the failing stage attached,
    e.g. ``[homogenize] grid has no solid voxels``.
    """
    material = material or MaterialSpec()
    if isinstance(spec, StrutModel):
        model, name = spec, getattr(spec.spec, "name", "") or "custom"
    else:
        base = _stage("build_base", build_base, spec)
        model = _stage("t4fas_fold", t4fas_fold, base)
        name = spec.name
    grid = _stage("voxelize", voxelize, model, resolution)
    if len(model) and grid.solid_count:
        metrics = _stage("metrics", geometric_metrics, model, resolution, grid)
    else:
        metrics = {"rho_bar": relative_density(grid), "s_bar": math.nan, "s_bar_cell": math.nan}
    stiff = _stage("homogenize", homogenize, grid, material, strain_magnitude, tol, bc)
    return _stage("analyze", analyze, stiff, material.youngs_modulus_gpa, name,
                  metrics["rho_bar"], metrics["s_bar"], s_bar_cell=metrics["s_bar_cell"])


# ---- sweep plans -----------------------------------------------------------

def _parse_path(path):
    """Classify an axis path: ('d', None), ('d', i), ('theta', i), ('spacing', i),
    ('spacing', None), ('resolution', None) or ('ratio', (i, j))."""
    path = path.replace(" ", "")
    if path in ("d", "spacing", "resolution"):
        return path, None
    m = _SCALAR.match(path)
    if m:
        return m.group(1), int(m.group(2))
    m = _RATIO.match(path)
    if m:
        return "ratio", (int(m.group(1)), int(m.group(2)))
    raise InvalidSpec(f"unrecognized sweep parameter {path!r}")


@dataclass
class SweepPlan:
    """Cartesian grid of parameter values applied to a base design.

    ``axes`` is a list of ``(path, values)``. Paths: ``d`` (all diameters),
    ``d<i>``, ``theta<i>``, ``spacing`` / ``spacing<i>``, ``resolution``, and
    ratio constraints ``d<i>/d<j>`` which set ``d_i = value * d_j`` after all
    plain axes have been applied.
    """

    base_spec: NestedLatticeSpec
    axes: list
    resolution: int = DEFAULT_SWEEP_RESOLUTION
    material: MaterialSpec = field(default_factory=MaterialSpec)
    strain_magnitude: float = DEFAULT_STRAIN
    tol: float = DEFAULT_TOL
    bc: str = "kinematic"

    def __post_init__(self):
        self.axes = [(str(p), list(v)) for p, v in self.axes]
        if not self.axes:
            raise InvalidSpec("a sweep needs at least one axis")
        indices = {o.index for o in self.base_spec.orders}
        for path, values in self.axes:
            kind, arg = _parse_path(path)
            if not values:
                raise InvalidSpec(f"axis {path!r} has no values")
            if kind in ("d", "theta") and arg is not None and arg not in indices:
                raise InvalidSpec(f"axis {path!r} names an order not in the design")
            if kind == "ratio" and not set(arg) <= indices:
                raise InvalidSpec(f"ratio {path!r} names an order not in the design")
        self._ratio_order()

    def _ratio_order(self):
        """Ratio constraints sorted so each source is final before it is read."""
        ratios = [_parse_path(p)[1] for p, _ in self.axes if _parse_path(p)[0] == "ratio"]
        targets = [i for i, _ in ratios]
        if len(set(targets)) != len(targets):
            raise InvalidSpec("a diameter is constrained by more than one ratio")
        deps = {i: j for i, j in ratios}
        order, done = [], set()
        for i in deps:
            chain, k = [], i
            while k in deps and k not in done:
                if k in chain:
                    raise InvalidSpec("ratio constraints form a cycle")
                chain.append(k)
                k = deps[k]
            for k in reversed(chain):
                order.append((k, deps[k]))
                done.add(k)
        return order

    @property
    def names(self):
        return [p for p, _ in self.axes]

    def points(self):
        """Parameter tuples in Cartesian order (last axis varies fastest)."""
        return list(itertools.product(*(v for _, v in self.axes)))

    def realize(self, values):
        """Apply one grid point to the base design; returns ``(spec, resolution)``."""
        spec = self.base_spec
        res = self.resolution
        diam = {o.index: o.diameter_mm for o in spec.orders}
        theta = {o.index: o.orientation_deg for o in spec.orders}
        spacing = list(spec.spacing_mm)
        ratio_vals = {}
        for (path, _), v in zip(self.axes, values):
            kind, arg = _parse_path(path)
            if kind == "d":
                for k in ([arg] if arg is not None else diam):
                    diam[k] = float(v)
            elif kind == "theta":
                theta[arg] = float(v)
            elif kind == "spacing":
                if arg is None:
                    spacing = [float(v)] * len(spacing)
                else:
                    spacing[arg] = float(v)
            elif kind == "resolution":
                res = int(v)
            else:
                ratio_vals[arg[0]] = float(v)
        for i, j in self._ratio_order():
            diam[i] = ratio_vals[i] * diam[j]
        orders = tuple(replace(o, diameter_mm=diam[o.index], orientation_deg=theta[o.index])
                       for o in spec.orders)
        return replace(spec, orders=orders, spacing_mm=tuple(spacing)), res


@dataclass
class SweepResult:
    names: list
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def write_csv(self, path, config=None):
        """Rows as CSV (swept values first) plus ``<path>.failures.csv``."""
        from .io import csv_line, provenance_lines
        from .analysis import AnisotropyReport

        with open(path, "w") as fh:
            for line in provenance_lines(config):
                fh.write(line + "\n")
            fh.write(",".join([*self.names, *AnisotropyReport.CSV_COLUMNS]) + "\n")
            for values, rep in self.rows:
                fh.write(csv_line([*values, *rep.csv_row()]) + "\n")
        with open(str(path) + ".failures.csv", "w") as fh:
            fh.write(",".join([*self.names, "stage", "error", "message"]) + "\n")
            for values, err in self.failures:
                msg = str(err).replace(",", ";").replace("\n", " ")
                fh.write(csv_line([*values, err.stage or "", type(err).__name__, msg]) + "\n")


def _run_point(plan, values):
    try:
        spec, res = _stage("build_base", plan.realize, values)
        rep = run_pipeline(spec, res, plan.material, plan.strain_magnitude, plan.tol, plan.bc)
        return values, rep, None
    except LatticeError as exc:
        return values, None, exc


def run_sweep(plan, workers=1):
    """Run every grid point; failures are collected instead of raised."""
    points = plan.points()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_point, [plan] * len(points), points))
    else:
        outcomes = [_run_point(plan, p) for p in points]
    result = SweepResult(plan.names)
    for values, rep, err in outcomes:
        if err is None:
            result.rows.append((values, rep))
        else:
            log.warning("sweep point %s failed: %s", values, err)
            result.failures.append((values, err))
    return result


# ---- density targeting -----------------------------------------------------

def _model_at(spec, d):
    if isinstance(spec, StrutModel):
        segs = [Segment(s.endpoint_a, s.endpoint_b, d / 2.0) for s in spec.segments]
        return StrutModel(spec.cell_size_mm, segs, spec.spec)
    return t4fas_fold(build_base(spec.with_diameters(d)))


def density_at(spec, d, resolution):
    return relative_density(voxelize(_model_at(spec, d), resolution))


def target_density(spec, target_rho, d_min, d_max, resolution=DEFAULT_SWEEP_RESOLUTION,
                   tol=0.002, d_floor=1e-4):
    """Uniform strut diameter giving relative density ``target_rho``.

    Bisection on ``d`` using the voxel density, which is monotone but
    stair-stepped in ``d``. Returns as soon as ``|rho(d) - target| <= tol``.
    If the bracket shrinks below ``d_floor`` first, the target sits inside a
    density jump of the voxel staircase and no diameter meets the tolerance
    at this resolution; that is reported as :class:`Unbracketed` too.

    ``spec`` may also be a StrutModel, whose radii are all set to ``d/2``.
    """
    if not 0 < d_min < d_max:
        raise InvalidSpec("need 0 < d_min < d_max")
    if not target_rho > 0:
        raise Unbracketed(f"target {target_rho:g} is not reachable with a positive diameter")
    lo, hi = float(d_min), float(d_max)
    r_lo, r_hi = density_at(spec, lo, resolution), density_at(spec, hi, resolution)
    if not r_lo <= target_rho <= r_hi:
        raise Unbracketed(f"target {target_rho:g} outside [{r_lo:.4g}, {r_hi:.4g}] "
                          f"for d in [{lo:g}, {hi:g}]")
    for d, r in ((lo, r_lo), (hi, r_hi)):
        if abs(r - target_rho) <= tol:
            return d
    while hi - lo > d_floor:
        mid = 0.5 * (lo + hi)
        r = density_at(spec, mid, resolution)
        if abs(r - target_rho) <= tol:
            return mid
        if r < target_rho:
            lo, r_lo = mid, r
        else:
            hi, r_hi = mid, r
    raise Unbracketed(f"density jumps from {r_lo:.4g} to {r_hi:.4g} near d = {lo:.5g} mm at "
                      f"n={resolution}; no diameter is within {tol:g} of {target_rho:g}")


def plan_from_dict(data):
    from .io import material_from_value, spec_from_dict
    from .geometry import find_design

    if "design" in data and "spec" in data:
        raise InvalidSpec("give either 'design' or 'spec', not both")
    if "design" in data:
        base = find_design(data["design"])
    elif "spec" in data:
        base = spec_from_dict(data["spec"])
    else:
        raise InvalidSpec("sweep plan needs a 'design' or a 'spec'")
    axes = data.get("axes")
    if isinstance(axes, dict):
        axes = list(axes.items())
    else:
        axes = [(a["path"], a["values"]) for a in axes or []]
    axes = [(p, _expand(v)) for p, v in axes]
    return SweepPlan(base, axes, int(data.get("resolution", DEFAULT_SWEEP_RESOLUTION)),
                     material_from_value(data.get("material")),
                     float(data.get("strain_magnitude", DEFAULT_STRAIN)),
                     float(data.get("tol", DEFAULT_TOL)), data.get("bc", "kinematic"))


def _expand(values):
    """A list, or a ``{start, stop, step}`` range with the stop included."""
    if isinstance(values, dict):
        start, stop, step = (float(values[k]) for k in ("start", "stop", "step"))
        count = int(round((stop - start) / step)) + 1
        return [float(np.round(start + k * step, 12)) for k in range(count)]
    return list(values)


def plan_to_dict(plan):
    from .io import material_to_dict, spec_to_dict

    return {
        "spec": spec_to_dict(plan.base_spec),
        "axes": [{"path": p, "values": list(v)} for p, v in plan.axes],
        "resolution": plan.resolution,
        "material": material_to_dict(plan.material),
        "strain_magnitude": plan.strain_magnitude,
        "tol": plan.tol,
        "bc": plan.bc,
    }
