from __future__ import annotations

import csv

import numpy as np
import pytest

from idealsurf.analytic import ParametricSurface, sample_mesh
from idealsurf.flow import (FlowConfig, FlowState, auto_dt, flow_step, free_vertices,
                            planarity_test, run_flow)
from idealsurf.generators import disk_mesh, icosphere, perturbed_disk


@pytest.fixture(scope="module")
def bumped():
    return perturbed_disk(32, support=0.7)


@pytest.mark.parametrize("kwargs", [
    {"dt": -1.0}, {"dt": "fast"}, {"stop_F": 0.0}, {"stepper": "rk4"},
    {"boundary_mode": "free"}, {"max_steps": -1}, {"collar_rings": -1},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        FlowConfig(**kwargs)


def test_free_vertices_exclude_collar(bumped):
    free = free_vertices(bumped, 2)
    assert not np.isin(bumped.boundary_vertices, free).any()
    assert len(free) < bumped.n_vertices - len(bumped.boundary_vertices)
    closed = icosphere(1)
    assert len(free_vertices(closed)) == closed.n_vertices


def test_planar_mesh_is_a_fixed_point():
    m = disk_mesh(16)
    st = flow_step(FlowState.start(m), FlowConfig())
    assert np.array_equal(st.mesh.vertices, m.vertices)
    assert st.step == 1 and st.F_history == [0.0, 0.0]


def test_auto_dt_scales_with_size(bumped):
    a = auto_dt(bumped, "semi-implicit")
    b = auto_dt(bumped.with_vertices(2 * bumped.vertices), "semi-implicit")
    assert b == pytest.approx(64 * a)
    assert auto_dt(bumped, "explicit") < a


def test_semi_implicit_flow_decreases_energy(bumped, tmp_path):
    hist = tmp_path / "h.csv"
    res = run_flow(bumped, FlowConfig(max_steps=6, snapshot_every=3),
                   snapshot_dir=tmp_path / "snap", history_csv=hist)
    F = res.state.F_history
    assert len(F) == 7
    assert F[-1] < 0.1 * F[0]
    assert res.monotone_fraction == 1.0
    assert res.verdict == "not-converged" and res.reason == "max_steps reached"
    rows = list(csv.reader(hist.open()))
    assert rows[0] == ["step", "F", "A2", "supA0"] and len(rows) == 8
    snaps = sorted(p.name for p in (tmp_path / "snap").iterdir())
    assert snaps == ["step_000000.obj", "step_000003.obj", "step_000006.obj"]


def test_flow_keeps_collar_fixed(bumped):
    res = run_flow(bumped, FlowConfig(max_steps=2))
    collar = np.setdiff1d(np.arange(bumped.n_vertices), free_vertices(bumped))
    assert np.array_equal(res.state.mesh.vertices[collar], bumped.vertices[collar])


def test_flow_reaches_plane_on_small_disk(bumped):
    res = run_flow(bumped, FlowConfig(stop_F=1e-8, stop_A0=1e-3, max_steps=200))
    assert res.verdict == "planar"
    assert planarity_test(res.state.mesh).planar


def test_flat_boundary_violation_is_reported():
    m = sample_mesh(ParametricSurface.graph([(1.0, 3, 0)]), 12)
    res = run_flow(m, FlowConfig(max_steps=3))
    assert res.verdict == "not-converged"
    assert "boundary" in res.reason
    assert res.state.step == 0
    assert res.boundary["max_A"] > 0.1


def test_explicit_blowup_is_diverged(bumped):
    res = run_flow(bumped, FlowConfig(stepper="explicit", dt=1.0, max_halvings=0,
                                      max_steps=5))
    assert res.verdict == "diverged"
    assert res.diverged_step is not None


def test_large_implicit_step_is_stable(bumped):
    res = run_flow(bumped, FlowConfig(dt=50.0, max_steps=2))
    assert res.verdict != "diverged"
    assert res.state.F_history[-1] < res.state.F_history[0]


def test_dt_halving_recovers(bumped):
    res = run_flow(bumped, FlowConfig(stepper="explicit", dt=1e-2, max_steps=2,
                                      max_halvings=40))
    assert res.verdict != "diverged"
    assert max(res.state.dt_history) < 1e-2


def test_planarity_prongs(ico3):
    flat = planarity_test(disk_mesh(16))
    assert flat.planar and flat.sup_A0 == 0
    sph = planarity_test(ico3)
    assert sph.sup_A0 < 1e-2 and sph.plane_distance > 0.1 and not sph.planar
