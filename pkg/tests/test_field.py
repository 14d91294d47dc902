from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fskan.errors import DegenerateFitError, ExtrapolationError
from fskan.field import (
    Profile,
    fit_external_velocity,
    fs_stream,
    pde_residual,
    pseudo_stream,
    read_velocity_csv,
    stream_grid,
    write_field_csv,
)
from fskan.integrate import IntegratorConfig
from fskan.model import FalknerSkanParams, FlowConstants, PseudoParams
from fskan.shoot import falkner_skan_profile, pseudo_profile, solve_falkner_skan


@pytest.fixture(scope="module")
def profile():
    return Profile.from_trajectory(pseudo_profile(PseudoParams(1.0, 0.2), 0.0, IntegratorConfig()))


def test_profile_reproduces_nodes(profile):
    f, fp, fpp, _ = profile(profile.t[::500])
    assert np.array_equal(f, profile.f_nodes[::500])
    assert np.array_equal(fp, profile.fp_nodes[::500])
    assert np.allclose(fpp, profile.fpp_nodes[::500], rtol=0, atol=1e-15)


def test_profile_refuses_extrapolation(profile):
    with pytest.raises(ExtrapolationError):
        profile(profile.t_max + 1e-6)
    with pytest.raises(ExtrapolationError):
        profile(-1e-9)


def test_profile_rejects_bad_nodes():
    with pytest.raises(ValueError):
        Profile([0.0, 0.0, 1.0], [0, 0, 1], [1, 1, 1], [0, 0, 0])


@pytest.mark.parametrize("x", [1.0, 2.0, 5.0])
def test_boundary_conditions(profile, x):
    c = FlowConstants.from_similarity(1.0, 0.2, nu=0.5, U_inf=2.0)
    wall = pseudo_stream(x, 0.0, profile, c)
    assert wall.u == pytest.approx(c.U_w / x, rel=1e-14)
    assert wall.v == pytest.approx(-c.V_w / x, rel=1e-14)
    # the closing nodes lie inside the settled window, |f' - 1| < 1e-6
    far = pseudo_stream(x, profile.t[-2] * x / c.b, profile, c)
    assert far.u == pytest.approx(c.U_inf / x, rel=1e-6)


def test_velocity_is_stream_derivative(profile):
    c = FlowConstants.from_similarity(1.0, 0.2)
    x, y, s = 1.5, 0.7, 1e-5
    mid = pseudo_stream(x, y, profile, c)
    dpsi_dy = (pseudo_stream(x, y + s, profile, c).psi - pseudo_stream(x, y - s, profile, c).psi) / (2 * s)
    dpsi_dx = (pseudo_stream(x + s, y, profile, c).psi - pseudo_stream(x - s, y, profile, c).psi) / (2 * s)
    assert mid.u == pytest.approx(dpsi_dy, abs=1e-8)
    assert mid.v == pytest.approx(-dpsi_dx, abs=1e-8)


def test_stream_rejects_nonpositive_x(profile):
    with pytest.raises(ValueError):
        pseudo_stream(0.0, 1.0, profile, FlowConstants.from_similarity(1.0, 0.2))


def test_residual_controls(profile):
    c = FlowConstants.from_similarity(1.0, 0.2)
    assert pde_residual(profile, c) < 1e-4
    assert pde_residual(profile.perturbed(0.01), c) > 1e-3
    assert pde_residual(Profile.trivial(), FlowConstants.from_similarity(1.0, 1.0)) < 1e-10
    with pytest.raises(ValueError):
        pde_residual(profile, c, method="spectral")


def test_residual_independent_of_dimensional_scales(profile):
    ref = pde_residual(profile, FlowConstants.from_similarity(1.0, 0.2))
    # t = b y / x must stay inside the profile, so shrink y with b
    c = FlowConstants.from_similarity(1.0, 0.2, nu=0.25, U_inf=4.0)
    assert pde_residual(profile, c, y_range=(0.0, 2.0 / c.b)) < 1e-4
    assert ref < 1e-4


def test_finite_difference_cross_check(profile):
    c = FlowConstants.from_similarity(1.0, 0.2)
    coarse = pde_residual(profile, c, method="fd", fd_step=1e-2)
    fine = pde_residual(profile, c, method="fd", fd_step=2e-3)
    assert coarse < 1e-3
    # second order: a 5x smaller stencil cuts the truncation error about 25x
    assert coarse / fine > 15.0
    assert pde_residual(profile.perturbed(0.01), c, method="fd") > 1e-3


def test_residual_range_errors(profile):
    c = FlowConstants.from_similarity(1.0, 0.2)
    with pytest.raises(ExtrapolationError):
        pde_residual(profile, c, y_range=(0.0, 100.0))
    with pytest.raises(ValueError):
        pde_residual(profile, c, x_range=(0.0, 1.0))


@pytest.mark.parametrize("m", [0.0, 1.0])
def test_falkner_skan_self_similarity(m):
    params = FalknerSkanParams(m)
    prof = Profile.from_trajectory(falkner_skan_profile(params, solve_falkner_skan(params)))
    alpha, beta = params.alpha, params.beta
    for x, y, lam in [(1.0, 0.5, 2.0), (2.0, 1.0, 0.5), (3.0, 2.0, 1.7)]:
        ref = fs_stream(x, y, prof, m)
        scaled = fs_stream(lam * x, lam ** beta * y, prof, m) * lam ** -alpha
        assert scaled == pytest.approx(ref, rel=1e-12)


def test_fit_examples():
    x = np.linspace(0.5, 5.0, 12)
    fit = fit_external_velocity(zip(x, 2 * np.sqrt(x)))
    assert (fit.c1, fit.c2, fit.m) == pytest.approx((4.0, 0.0, 0.5), abs=1e-6)
    fit = fit_external_velocity(zip(x, np.sqrt(x ** 2 + 1)))
    assert (fit.c1, fit.c2, fit.m) == pytest.approx((1.0, 1.0, 1.0), abs=1e-6)
    fit = fit_external_velocity(zip(x, x + x ** 2))
    assert fit.rms_residual > 1e-3


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_external_velocity([(1, 1), (2, 2), (3, 3)])
    with pytest.raises(ValueError):
        fit_external_velocity([(0, 1), (2, 2), (3, 3), (4, 4)])
    with pytest.raises(ValueError):
        fit_external_velocity([(1, -1), (2, 2), (3, 3), (4, 4)])
    with pytest.raises(DegenerateFitError):
        fit_external_velocity([(2, 1), (2, 2), (2, 3), (2, 4)])
    with pytest.raises(DegenerateFitError):
        fit_external_velocity([(1, 0), (2, 0), (3, 0), (4, 0)])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(0.0, 5.0), st.floats(-2.0, 2.0).filter(lambda m: abs(m) > 0.05), st.integers(8, 20))
def test_fit_round_trip(c1, c2, m, n):
    x = np.geomspace(0.5, 20.0, n)
    fit = fit_external_velocity(zip(x, np.sqrt(c1 * x ** (2 * m) + c2)))
    assert fit.m == pytest.approx(m, abs=1e-6)
    assert fit.c1 == pytest.approx(c1, rel=1e-6)
    assert fit.c2 == pytest.approx(c2, rel=1e-6, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 10.0), st.floats(0.0, 10.0)), min_size=4, max_size=12))
def test_fit_coefficients_nonnegative(samples):
    xs = [s[0] for s in samples]
    us = [s[1] for s in samples]
    if len(set(xs)) == 1 or not any(us):
        return
    fit = fit_external_velocity(samples)
    assert fit.c1 >= 0.0 and fit.c2 >= 0.0 and fit.rms_residual >= 0.0
    assert -3.0 <= fit.m <= 3.0


def test_csv_io(tmp_path, profile):
    c = FlowConstants.from_similarity(1.0, 0.2)
    samples = stream_grid(profile, c, [1.0, 2.0], [0.0, 1.0, 2.0])
    lines = write_field_csv(samples, tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x,y,psi,u,v" and len(lines) == 7
    src = tmp_path / "ue.csv"
    src.write_text("x,Ue\n1,2\n2,3\n", encoding="utf-8")
    assert read_velocity_csv(src) == [(1.0, 2.0), (2.0, 3.0)]
    src.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ValueError):
        read_velocity_csv(src)


def test_trivial_profile_shape():
    prof = Profile.trivial(10.0)
    f, fp, fpp, fppp = prof(np.array([0.0, 3.3, 10.0]))
    assert np.allclose(f, [0.0, 3.3, 10.0], atol=1e-14)
    assert np.all(fp == 1.0) and np.all(fpp == 0.0) and np.all(fppp == 0.0)
    assert math.isclose(prof.perturbed(0.5)(2.0)[1], 1.5)
