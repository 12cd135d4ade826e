import math

import numpy as np
import pytest

from conftest import L0, through_cylinder
from nestlattice.errors import InvalidSpec, LatticeError, NoSolid, NonPositiveLength, Unbracketed
from nestlattice.geometry import Segment, StrutModel, find_design
from nestlattice.homogenize import MaterialSpec
from nestlattice.sweep import (SweepPlan, density_at, plan_from_dict, plan_to_dict, run_pipeline,
                               run_sweep, target_density)


def solid_cube_model():
    # one fat capsule whose radius covers every voxel center of the cell
    return StrutModel(L0, [Segment((0, 0, -1), (0, 0, 1), L0)])


def test_pipeline_solid_cube():
    rep = run_pipeline(solid_cube_model(), 32)
    assert rep.rho_bar == 1.0
    assert rep.zener == pytest.approx(1.0, abs=0.02)
    assert rep.e_bar == pytest.approx(1.0, abs=0.02)
    assert rep.bc_family == "kinematic" and rep.resolution == 32


def test_pipeline_empty_model_fails_at_homogenize():
    with pytest.raises(NoSolid) as err:
        run_pipeline(StrutModel(L0, []), 8)
    assert err.value.stage == "homogenize"
    assert str(err.value).startswith("[homogenize]")


def test_pipeline_catalog_design_small():
    rep = run_pipeline(find_design("XNFS:0-1:0-30").with_diameters(1.2), 12)
    assert rep.design_name == "XNFS:0-1:0-30"
    assert 0 < rep.rho_bar < 1 and rep.s_bar > 0
    assert rep.e_bar == pytest.approx(rep.e_gpa / 193.0)
    assert len(rep.metadata["iterations"]) == 6


# --- plans -----------------------------------------------------------------------

def test_plan_validation():
    base = find_design("XNFS:0-1:0-15")
    with pytest.raises(InvalidSpec):
        SweepPlan(base, [])
    with pytest.raises(InvalidSpec):
        SweepPlan(base, [("d2", [0.5])])
    with pytest.raises(InvalidSpec):
        SweepPlan(base, [("d0/d1", [1.0]), ("d1/d0", [1.0])])
    with pytest.raises(InvalidSpec):
        SweepPlan(base, [("radius", [1.0])])


def test_ratio_constraint_realized_exactly():
    base = find_design("XNFS:0-15-30")
    plan = SweepPlan(base, [("d2", [0.6, 0.8, 1.0]), ("d1/d2", [0.5, 1.25]),
                            ("d0/d1", [0.75, 1.5])])
    assert len(plan.points()) == 12
    for values in plan.points():
        spec, _ = plan.realize(values)
        d = {o.index: o.diameter_mm for o in spec.orders}
        assert d[2] == values[0]
        assert abs(d[1] - values[1] * d[2]) <= 1e-12
        assert abs(d[0] - values[2] * d[1]) <= 1e-12


def test_cartesian_order_last_axis_fastest():
    plan = SweepPlan(find_design("XNFS:0-1:0-0"), [("theta1", [0, 15]), ("d", [0.6, 0.7, 0.8])])
    assert plan.points()[:4] == [(0, 0.6), (0, 0.7), (0, 0.8), (15, 0.6)]


def test_plan_dict_round_trip():
    data = {"design": "XNFS:0-1:0-30", "resolution": 16,
            "axes": [{"path": "d1", "values": {"start": 0.6, "stop": 1.0, "step": 0.1}},
                     {"path": "d0/d1", "values": [0.5, 1.0, 1.5]}]}
    plan = plan_from_dict(data)
    assert plan.axes[0][1] == [0.6, 0.7, 0.8, 0.9, 1.0]
    again = plan_from_dict(plan_to_dict(plan))
    assert again.points() == plan.points() and again.base_spec == plan.base_spec


def test_sweep_5x5_counts_and_determinism(tmp_path):
    plan = SweepPlan(find_design("XNFS:0-1:0-0"),
                     [("d1", [1.4, 1.5, 1.6, 1.7, 1.8]), ("d0/d1", [0.8, 0.9, 1.0, 1.1, 1.2])],
                     resolution=8, material=MaterialSpec(void_contrast=1e-3))
    res = run_sweep(plan)
    assert len(res.rows) + len(res.failures) == 25
    assert len(res.rows) == 25
    res.write_csv(tmp_path / "a.csv")
    run_sweep(plan).write_csv(tmp_path / "b.csv")
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    lines = a.decode().splitlines()
    assert lines[0].startswith("# nestlattice")
    assert lines[1].startswith("d1,d0/d1,name,n,rho_bar")
    assert len(lines) == 2 + 25


def test_sweep_density_increases_with_diameter():
    plan = SweepPlan(find_design("XNFS:1:30"), [("d", [0.6, 0.7, 0.8, 0.9, 1.0])], resolution=20,
                     material=MaterialSpec(void_contrast=1e-3))
    rows = run_sweep(plan).rows
    rho = [rep.rho_bar for _, rep in rows]
    assert all(b > a for a, b in zip(rho, rho[1:]))


def test_sweep_isolates_failures(tmp_path):
    plan = SweepPlan(find_design("XNFS:2:0").with_diameters(1.2), [("spacing", [1.0, 4.0])],
                     resolution=8, material=MaterialSpec(void_contrast=1e-3))
    res = run_sweep(plan)
    assert [v for v, _ in res.rows] == [(1.0,)]
    (values, err), = res.failures
    assert values == (4.0,) and isinstance(err, NonPositiveLength)
    res.write_csv(tmp_path / "s.csv")
    side = (tmp_path / "s.csv.failures.csv").read_text().splitlines()
    assert side[1].startswith("4,build_base,NonPositiveLength")


# --- density targeting ------------------------------------------------------------

def test_target_density_cylinder_inverts_analytic():
    target = math.pi * 0.8 ** 2 / (4 * L0 ** 2)
    d = target_density(through_cylinder(), target, 0.4, 1.2, resolution=256, tol=1e-4)
    assert d == pytest.approx(0.8, abs=0.01)
    assert d == pytest.approx(L0 * math.sqrt(4 * target / math.pi), abs=0.01)


def test_target_density_post_verification():
    spec = find_design("XNFS:0-1:0-45")
    d = target_density(spec, 0.15, 0.3, 1.5, resolution=48, tol=0.002)
    assert abs(density_at(spec, d, 48) - 0.15) <= 0.002


def test_target_density_inside_a_jump():
    # at n=12 a single step of d flips whole voxel shells at once
    with pytest.raises(Unbracketed, match="jumps"):
        target_density(find_design("XNFS:0-1:0-45"), 0.15, 0.3, 1.5, resolution=12, tol=1e-4)


def test_target_density_unbracketed():
    with pytest.raises(Unbracketed):
        target_density(through_cylinder(), 0.0, 0.2, 1.0, resolution=32)
    with pytest.raises(InvalidSpec):
        target_density(through_cylinder(), 0.01, 1.0, 0.2, resolution=32)
