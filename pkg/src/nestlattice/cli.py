"""Command-line front end.

Exit codes
----------
0 success; 1 other package error; 2 invalid spec or usage; 3 non-positive
nested side length; 4 empty model; 5 no solid voxels; 6 solver did not
converge; 7 degenerate analysis input; 8 fit failure; 9 density target not
bracketed; 10 file I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .analysis import analyze, cubic_project, ymsurface_mesh
from .errors import InvalidSpec, LatticeError
from .geometry import build_full, catalog, find_design
from .homogenize import DEFAULT_STRAIN, DEFAULT_TOL, homogenize
from .sweep import plan_from_dict, run_sweep, target_density
from .voxel import (DEFAULT_RESOLUTION, export_obj, export_stl, geometric_metrics,
                    read_grid, surface_mesh, voxelize, write_grid)

log = logging.getLogger("nestlattice")

EXIT_IO = 10


@dataclass
class RunConfig:
    """Settings shared by the model-producing subcommands.

    Exactly one of ``design`` (a catalog name) and ``spec`` (a spec mapping)
    selects the geometry.
    """

    design: str | None = None
    spec: dict | None = None
    resolution: int = DEFAULT_RESOLUTION
    material: dict = field(default_factory=lambda: {"youngs_modulus_gpa": 193.0,
                                                    "poisson_ratio": 0.28,
                                                    "void_contrast": 1e-6})
    strain_magnitude: float = DEFAULT_STRAIN
    tol: float = DEFAULT_TOL
    max_iters: int | None = None
    bc: str = "kinematic"
    output_dir: str = "."
    formats: list = field(default_factory=lambda: ["json", "csv"])

    def __post_init__(self):
        if (self.design is None) == (self.spec is None):
            raise InvalidSpec("config must name exactly one of 'design' or 'spec'")
        if int(self.resolution) < 2:
            raise InvalidSpec("resolution must be >= 2")
        io.material_from_value(self.material)

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpec(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return {k: v for k, v in asdict(self).items() if v is not None}

    def lattice_spec(self):
        if self.design is not None:
            return _design(self.design)
        return io.spec_from_dict(self.spec)


def _design(name):
    try:
        return find_design(name)
    except KeyError as exc:
        raise InvalidSpec(str(exc.args[0])) from exc


def _args_config(args):
    """Plain, hashable view of the parsed arguments."""
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "verbose")}


def _out(path, default):
    p = Path(path or default)
    if p.parent != Path(""):
        p.parent.mkdir(parents=True, exist_ok=True)
    return p


# ---- subcommands ------------------------------------------------------------

def cmd_catalog(args):
    try:
        specs = catalog(args.family)
    except ValueError as exc:
        raise InvalidSpec(str(exc)) from exc
    for s in specs:
        orders = " ".join(f"N{o.index}@{o.orientation_deg:g}deg/d={o.diameter_mm:g}"
                          for o in s.orders)
        print(f"{s.name}\t{orders}")
        if args.write_specs:
            d = Path(args.write_specs)
            d.mkdir(parents=True, exist_ok=True)
            io.write_spec(s, d / (s.name.replace(":", "_") + ".yaml"))
    return 0


def _selected_spec(args):
    if args.config:
        return RunConfig.from_dict(io.load_config(args.config)).lattice_spec()
    if bool(args.spec) == bool(args.design):
        raise InvalidSpec("give exactly one of --spec, --design or --config")
    return io.read_spec(args.spec) if args.spec else _design(args.design)


def cmd_generate(args):
    spec = _selected_spec(args)
    model = build_full(spec)
    cfg = io.spec_to_dict(spec)
    out = _out(args.out, (spec.name or "model").replace(":", "_") + ".struts")
    io.write_model(model, out, cfg)
    print(f"{out}: {len(model)} segments")
    if args.stl:
        mesh = surface_mesh(model, args.resolution, capped=True)
        export_stl(mesh, _out(args.stl, "model.stl"))
        print(f"{args.stl}: {len(mesh)} triangles")
    return 0
    return 0


def cmd_metrics(args):
    model = io.read_model(args.model)
    m = geometric_metrics(model, args.resolution)
    header = "model,n,rho_bar,s_bar,s_bar_cell,surface_area_mm2"
    row = io.csv_line([Path(args.model).name, args.resolution, m["rho_bar"], m["s_bar"],
                       m["s_bar_cell"], m["surface_area_mm2"]])
    if args.out:
        with open(_out(args.out, ""), "w") as fh:
            for line in io.provenance_lines(_args_config(args)):
                fh.write(line + "\n")
            fh.write(header + "\n" + row + "\n")
    print(header)
    print(row)
    return 0


def cmd_homogenize(args):
    if bool(args.model) == bool(args.grid):
        raise InvalidSpec("give exactly one of --model or --grid")
    if args.grid:
        grid = read_grid(args.grid)
    else:
        grid = voxelize(io.read_model(args.model), args.resolution)
        if args.save_grid:
            write_grid(grid, _out(args.save_grid, ""))
    mat = io.material_from_value(args.material)
    if args.void_contrast is not None:
        mat = io.material_from_value(f"{mat.youngs_modulus_gpa},{mat.poisson_ratio},"
                                     f"{args.void_contrast}")
    stiff = homogenize(grid, mat, args.strain, args.tol, args.bc, args.max_iters)
    out = _out(args.out, "stiffness.txt")
    io.write_stiffness(stiff, out, _args_config(args))
    np.savetxt(sys.stdout, stiff.c, fmt="%12.6g")
    print(f"asymmetry {stiff.asymmetry:.3e}; iterations {stiff.metadata['iterations']}")
    return 0


def cmd_analyze(args):
    stiff = io.read_stiffness(args.stiffness)
    rep = analyze(stiff, args.es, args.name or Path(args.stiffness).stem,
                  args.rho_bar, args.s_bar)
    if args.out:
        io.write_report(rep, _out(args.out, ""), _args_config(args))
    print(json.dumps({k: v for k, v in rep.to_dict().items() if k != "metadata"},
                     indent=2, default=str))
    return 0


def cmd_sweep(args):
    data = io.load_config(args.plan)
    plan = plan_from_dict(data)
    result = run_sweep(plan, workers=args.workers)
    out = _out(args.out, Path(args.plan).with_suffix(".csv").name)
    result.write_csv(out, data)
    io.write_sidecar(out, plan=str(args.plan), points=len(plan.points()))
    print(f"{out}: {len(result.rows)} rows, {len(result.failures)} failures")
    return 0


def cmd_target(args):
    spec = _selected_spec(args)
    d = target_density(spec, args.rho, args.d_min, args.d_max, args.resolution, args.tol)
    print(f"{d:.6f}")
    return 0


def _stiffness_modulus(stiff, es):
    if es is not None:
        return es
    return float(stiff.metadata.get("material", {}).get("youngs_modulus_gpa", 193.0))


def cmd_ymsurf(args):
    stiff = io.read_stiffness(args.stiffness)
    mesh = ymsurface_mesh(cubic_project(stiff), _stiffness_modulus(stiff, args.es), args.subdiv)
    out = _out(args.out, "ymsurf.obj")
    export_obj(mesh, out)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    print(f"{out}: {len(mesh)} triangles, radius range [{radii.min():.6g}, {radii.max():.6g}]")
    return 0


def cmd_export_stl(args):
    model = io.read_model(args.model)
    mesh = surface_mesh(model, args.resolution, capped=not args.open)
    out = _out(args.out, "model.stl")
    export_stl(mesh, out)
    print(f"{out}: {len(mesh)} triangles, watertight={mesh.watertight}")
    return 0


# ---- argument parsing -------------------------------------------------------

def _add_selector(p):
    p.add_argument("--spec", help="spec config file (YAML or JSON)")
    p.add_argument("--design", help="catalog design name, e.g. XNFS:0-1:0-30")
    p.add_argument("--config", help="run config file naming a design or spec")


def build_parser():
    ap = argparse.ArgumentParser(prog="nestlattice", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("catalog", help="list the named designs")
    p.add_argument("family", help="mono, bi, tri or all")
    p.add_argument("--write-specs", metavar="DIR", help="also write one spec file per design")
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("generate", help="build and fold a strut model")
    _add_selector(p)
    p.add_argument("--out", help="strut model file")
    p.add_argument("--stl", help="also write a capped STL")
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("metrics", help="relative density and surface area density")
    p.add_argument("--model", required=True)
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("homogenize", help="effective 6x6 stiffness of a model or voxel grid")
    p.add_argument("--model")
    p.add_argument("--grid", help="voxel grid dump instead of a model")
    p.add_argument("--save-grid", help="write the voxel grid used")
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.add_argument("--material", default="193,0.28", help="E_GPa,nu[,void_contrast]")
    p.add_argument("--void-contrast", type=float)
    p.add_argument("--strain", type=float, default=DEFAULT_STRAIN)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--bc", choices=("kinematic", "periodic"), default="kinematic")
    p.add_argument("--out")
    p.set_defaults(func=cmd_homogenize)

    p = sub.add_parser("analyze", help="cubic constants, E, Zener ratio and class")
    p.add_argument("--stiffness", required=True)
    p.add_argument("--es", type=float, default=193.0, help="base modulus in GPa")
    p.add_argument("--name")
    p.add_argument("--rho-bar", type=float, default=float("nan"))
    p.add_argument("--s-bar", type=float, default=float("nan"))
    p.add_argument("--out", help="report file (.json or .csv)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="run a parameter sweep plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("target-density", help="uniform diameter reaching a relative density")
    _add_selector(p)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--d-min", type=float, default=0.1)
    p.add_argument("--d-max", type=float, default=1.5)
    p.add_argument("--resolution", type=int, default=48)
    p.add_argument("--tol", type=float, default=0.002)
    p.set_defaults(func=cmd_target)

    p = sub.add_parser("ymsurf", help="directional Young's modulus surface as OBJ")
    p.add_argument("--stiffness", required=True)
    p.add_argument("--subdiv", type=int, default=3)
    p.add_argument("--es", type=float, help="base modulus (default: from stiffness metadata)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ymsurf)

    p = sub.add_parser("export-stl", help="triangulate a strut model to binary STL")
    p.add_argument("--model", required=True)
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.add_argument("--out")
    p.add_argument("--open", action="store_true", help="leave boundary cuts untriangulated")
    p.set_defaults(func=cmd_export_stl)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except LatticeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
