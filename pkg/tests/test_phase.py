from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fskan.errors import DomainError
from fskan.integrate import IntegratorConfig, integrate, integrate_pseudo_batch
from fskan.model import pseudo_field
from fskan.phase import (
    BasinMap,
    EquilibriumClass,
    TrajectoryClass,
    basin_map,
    classify_equilibrium,
    classify_trajectory,
    energy,
    energy_along,
    in_basin,
    jacobian,
    phi_squared_integral,
    separatrix_phi2,
    write_basin_csv,
    write_basin_pgm,
)


def test_energy_levels():
    assert energy(1.0, 0.0) == pytest.approx(-2.0 / 3.0, abs=1e-15)
    assert energy(2.0, 0.0) == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert energy(-1.0, 0.0) == pytest.approx(2.0 / 3.0, abs=1e-15)


def test_basin_examples():
    assert in_basin(0.2, 0.0)
    assert 0.2 * (0.04 / 3 - 1) == pytest.approx(-0.19733333, abs=1e-8)
    assert not in_basin(-1.0, 0.0)
    assert not in_basin(2.0, 0.0)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_basin_matches_energy_level(zeta, d):
    if in_basin(zeta, d):
        assert zeta > -1.0 and energy(zeta, d) < 2.0 / 3.0


def test_equilibrium_examples():
    r = classify_equilibrium(3.0)
    assert r.kind is EquilibriumClass.STABLE_NODE
    assert sorted([r.lambda1.real, r.lambda2.real]) == [-2.0, -1.0]
    r = classify_equilibrium(math.sqrt(8.0))
    assert r.kind is EquilibriumClass.STABLE_NODE
    assert r.lambda1 == pytest.approx(-math.sqrt(2.0), abs=1e-7) and r.lambda2 == pytest.approx(-math.sqrt(2.0), abs=1e-7)
    r = classify_equilibrium(0.5)
    assert r.kind is EquilibriumClass.STABLE_SPIRAL
    assert r.lambda2 == pytest.approx(complex(-0.25, math.sqrt(8 - 0.25) / 2), abs=1e-15)
    assert classify_equilibrium(0.0).kind is EquilibriumClass.CENTER
    assert classify_equilibrium(-1e-300).kind is EquilibriumClass.UNSTABLE
    assert classify_equilibrium(1e-300).kind is EquilibriumClass.STABLE_SPIRAL


@given(st.floats(-5, 5, allow_nan=False))
def test_eigenvalues_match_numeric_solver(tau):
    r = classify_equilibrium(tau)
    assert abs(r.lambda1 + r.lambda2 + tau) <= 1e-12 * max(1.0, abs(tau))
    assert abs(r.lambda1 * r.lambda2 - 2.0) <= 2e-12
    numeric = np.linalg.eigvals(jacobian(tau))
    ours = sorted([r.lambda1, r.lambda2], key=lambda z: (z.real, z.imag))
    ref = sorted(numeric, key=lambda z: (z.real, z.imag))
    assert np.allclose(ours, ref, atol=1e-6)


def test_separatrix():
    assert separatrix_phi2(2.0) == 0.0
    assert separatrix_phi2(-1.0) == 0.0
    assert separatrix_phi2(1.0) == pytest.approx(8.0 / 3.0, abs=1e-15)
    for bad in (-1.01, 2.01):
        with pytest.raises(DomainError):
            separatrix_phi2(bad)


@given(st.floats(-1.0, 2.0))
def test_separatrix_lies_on_saddle_level(theta):
    phi2 = separatrix_phi2(theta)
    assert phi2 >= 0.0
    assert 0.5 * phi2 + theta ** 3 / 3 - theta == pytest.approx(2.0 / 3.0, abs=1e-13)


def test_trajectory_classes():
    assert classify_trajectory(integrate(pseudo_field(2.83), (0.2, 0.0), IntegratorConfig())) is TrajectoryClass.MONOTONE
    spiral = integrate(pseudo_field(0.5), (0.2, 0.0), IntegratorConfig(t_max=100.0))
    assert classify_trajectory(spiral) is TrajectoryClass.OSCILLATORY
    assert classify_trajectory(integrate(pseudo_field(-0.5), (0.5, 0.0), IntegratorConfig())) is TrajectoryClass.DIVERGENT
    short = integrate(pseudo_field(0.5), (0.2, 0.0), IntegratorConfig(t_max=5.0))
    assert classify_trajectory(short) is TrajectoryClass.INDETERMINATE


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 4.0), st.floats(-0.95, 1.95), st.floats(-2.0, 2.0))
def test_energy_never_rises(tau, zeta, d):
    traj = integrate(pseudo_field(tau), (zeta, d), IntegratorConfig(h=0.01, t_max=30.0))
    if traj.stop.kind.value == "diverged":
        return
    assert np.all(np.diff(energy_along(traj)) <= 1e-8)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-0.9, 1.9), st.floats(-2.0, 2.0))
def test_basin_is_forward_invariant(tau, zeta, d):
    if not in_basin(zeta, d):
        return
    traj = integrate(pseudo_field(tau), (zeta, d), IntegratorConfig(h=0.01, t_max=30.0))
    assert np.all(energy_along(traj) < 2.0 / 3.0)
    assert np.all(traj.theta > -1.0)


def test_phi_squared_tail_vanishes():
    traj = integrate(pseudo_field(1.0), (0.2, 0.5), IntegratorConfig())
    assert traj.stop.kind.value == "converged"
    running = phi_squared_integral(traj)
    assert running[0] == 0.0 and np.all(np.diff(running) >= 0.0)
    tail = running[-1] - running[np.searchsorted(traj.t, traj.stop.t)]
    assert tail < 1e-6


def test_basin_map_single_cells():
    inside = basin_map((1.0, 1.0), (0.0, 0.0), (1, 1), 1.0)
    assert inside.member[0, 0] and inside.converged[0, 0]
    outside = basin_map((-0.95, -0.95), (3.0, 3.0), (1, 1), 1.0)
    assert not outside.member[0, 0]
    with pytest.raises(ValueError):
        basin_map((0, 1), (0, 1), (2, 2), 0.0)


def test_basin_map_jobs_and_exports(tmp_path):
    config = IntegratorConfig(h=0.01)
    a = basin_map((-0.9, 1.9), (-2, 2), (5, 4), 1.0, config)
    b = basin_map((-0.9, 1.9), (-2, 2), (5, 4), 1.0, config, jobs=2)
    assert np.array_equal(a.converged, b.converged) and np.array_equal(a.member, b.member)
    assert not a.violations.any()
    rows = write_basin_csv(a, tmp_path / "b.csv").read_text().splitlines()
    assert rows[0] == "zeta,d,member,converged" and len(rows) == 21
    raw = write_basin_pgm(a, tmp_path / "b.pgm").read_bytes()
    assert raw.startswith(b"P5\n5 4\n255\n") and len(raw) == len(b"P5\n5 4\n255\n") + 20


def test_pgm_orientation(tmp_path):
    member = np.array([[True, False], [False, False]])
    converged = np.array([[True, False], [True, False]])
    bmap = BasinMap(1.0, np.array([0.0, 1.0]), np.array([0.0, 1.0]), member, converged)
    raw = write_basin_pgm(bmap, tmp_path / "o.pgm").read_bytes()
    # top row is the largest d; columns follow zeta
    assert list(raw[-4:]) == [85, 85, 255, 170]


def test_center_batch_drift():
    batch = integrate_pseudo_batch(0.0, [0.2, 1.5], [0.0, -0.3], IntegratorConfig(t_max=20.0), monitor_energy=True)
    assert np.all(batch.max_energy_drift < 1e-7)
