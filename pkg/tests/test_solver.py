import numpy as np
import pytest

from acmax.errors import AcmaxError, NotPositive
from acmax.gauduchon import gauduchon_factor
from acmax.geometries import twisted_torus, warped_torus
from acmax.grid import ScalarField
from acmax.operators import ma_log_density
from acmax.solve import (SolveOptions, SolveReport, residual, solve_continuity,
                         solve_flow)

from conftest import smooth_field


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(path="sideways")
    with pytest.raises(ValueError):
        SolveOptions(positivity_floor=2.0)
    with pytest.raises(ValueError):
        SolveOptions(newton_tol=-1.0)
    with pytest.raises(ValueError):
        SolveOptions(flow_integrator="leapfrog")


def test_residual_zero_case(twisted):
    r = residual(twisted, twisted.grid.zeros(), 0.0, twisted.grid.zeros())
    assert r.sup_norm() == 0.0


def test_residual_constant_forcing(twisted):
    r = residual(twisted, twisted.grid.zeros(), 0.0, twisted.grid.full(1.0))
    np.testing.assert_allclose(r.values, -1.0)


def test_residual_forward_constructed_triple(twisted):
    # with F built by the discrete forward map, the triple is an exact
    # discrete solution: residual at rounding level
    phi = smooth_field(twisted, seed=41, amp=0.15)
    ld, _ = ma_log_density(twisted, phi)
    factor = gauduchon_factor(twisted)
    b_star = factor.weighted_mean(ld.values)
    F = ScalarField(twisted.grid, ld.values - b_star)
    r = residual(twisted, phi, b_star, F)
    assert r.sup_norm() < 1e-13


def test_continuity_trivial(twisted):
    rep = solve_continuity(twisted, twisted.grid.zeros())
    assert rep.phi.sup_norm() <= 1e-10
    assert abs(rep.b) <= 1e-10


def test_continuity_constant_forcing(twisted):
    # (w + i ddbar 0)^n = e^{c + b} w^n forces b = -c exactly
    rep = solve_continuity(twisted, twisted.grid.full(0.4))
    assert rep.phi.sup_norm() <= 1e-12
    assert rep.b == pytest.approx(-0.4, abs=1e-12)


def test_continuity_recovers_discrete_forward_triple(twisted):
    phi = smooth_field(twisted, seed=42, amp=0.12)
    ld, _ = ma_log_density(twisted, phi)
    F = ScalarField(twisted.grid, ld.values)
    rep = solve_continuity(twisted, F)
    target = phi.values - np.max(phi.values)
    assert np.max(np.abs(rep.phi.values - target)) < 1e-7
    assert abs(rep.b) < 1e-7
    assert rep.residual_history[-1][1] <= 1e-10


def test_continuity_normalization_and_margins(twisted):
    F = smooth_field(twisted, seed=43, amp=0.2)
    rep = solve_continuity(twisted, F)
    assert np.max(rep.phi.values) == 0.0
    assert min(rep.positivity_margin_history) >= 0.05
    assert rep.monitors and rep.monitors[-1]["min_eig_tilted"] > 0.5


def test_warm_start_uniqueness(twisted):
    F = smooth_field(twisted, seed=44, amp=0.2)
    cold = solve_continuity(twisted, F)
    seedphi = smooth_field(twisted, seed=45, amp=0.1)
    warm = solve_continuity(twisted, F, initial_guess=seedphi, initial_b=0.05)
    assert np.max(np.abs(cold.phi.values - warm.phi.values)) < 1e-8
    assert abs(cold.b - warm.b) < 1e-8


def test_flow_trivial(twisted):
    rep = solve_flow(twisted, twisted.grid.zeros())
    assert rep.phi.sup_norm() <= 1e-10
    assert abs(rep.b) <= 1e-10
    assert rep.iterations == 0


def test_flow_constant_forcing(twisted):
    rep = solve_flow(twisted, twisted.grid.full(0.4))
    assert rep.phi.sup_norm() <= 1e-10
    assert rep.b == pytest.approx(-0.4, abs=1e-10)


def test_flow_matches_continuity(twisted):
    F = smooth_field(twisted, seed=46, amp=0.2)
    newton = solve_continuity(twisted, F)
    flow = solve_flow(twisted, F)
    tol = 10.0 * max(SolveOptions().flow_stop_tol, SolveOptions().newton_tol)
    assert np.max(np.abs(newton.phi.values - flow.phi.values)) <= tol
    assert abs(newton.b - flow.b) <= tol
    assert np.max(flow.phi.values) == 0.0


def test_flow_rk4_small_grid():
    tw = twisted_torus(2, 8, 0.3)
    F = smooth_field(tw, seed=47, amp=0.1)
    opts = SolveOptions(flow_integrator="rk4", flow_stop_tol=1e-8)
    rep = solve_flow(tw, F, opts)
    newton = solve_continuity(tw, F)
    assert np.max(np.abs(rep.phi.values - newton.phi.values)) < 1e-6


def test_flow_rkc_small_grid():
    tw = twisted_torus(2, 8, 0.3)
    F = smooth_field(tw, seed=47, amp=0.1)
    opts = SolveOptions(flow_integrator="rkc", flow_stop_tol=1e-8)
    rep = solve_flow(tw, F, opts)
    newton = solve_continuity(tw, F)
    assert np.max(np.abs(rep.phi.values - newton.phi.values)) < 1e-6


def test_solver_on_warped_background(warped):
    # nontrivial Gauduchon weight exercised inside the gauge
    F = smooth_field(warped, seed=48, amp=0.15)
    newton = solve_continuity(warped, F)
    flow = solve_flow(warped, F)
    assert np.max(np.abs(newton.phi.values - flow.phi.values)) < 1e-5
    assert abs(newton.b - flow.b) < 1e-5


def test_remark_bound_on_b(twisted):
    for seed in (50, 51):
        F = smooth_field(twisted, seed=seed, amp=0.2)
        rep = solve_continuity(twisted, F)
        assert abs(rep.b) <= np.max(np.abs(F.values)) + 1e-6


def test_huge_forcing_fails_loudly(twisted):
    F = smooth_field(twisted, seed=52, amp=30.0)
    opts = SolveOptions(newton_max_iter=4, t_step_min=0.25)
    with pytest.raises(AcmaxError):
        solve_continuity(twisted, F, opts)


def test_report_summary_shape(twisted):
    rep = solve_continuity(twisted, twisted.grid.zeros())
    summary = rep.summary()
    assert summary["method"] == "continuity"
    assert summary["sup_phi"] == 0.0
    assert isinstance(rep, SolveReport)
