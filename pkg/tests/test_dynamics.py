import math

import numpy as np
import pytest

from patchdyn import dynamics, geometry
from patchdyn.dynamics import (
    FlowState, MarkerSet, boundary_velocity, cfl_max_dt, circulation,
    rankine_mu, rankine_rotation_rate, rankine_speed, rankine_velocity,
    remesh, run, seed_markers, step, velocity_diagnostics, velocity_samples,
)
from patchdyn.errors import CFLError, InvalidInputError
from patchdyn.geometry import Contour, Patch
from patchdyn.patch_builder import ArmedPatchSpec, armed_patch, kirchhoff_ellipse, rankine


def small_armed():
    return armed_patch(ArmedPatchSpec(m=3, N=2.0, gamma=0.05, resolution=0.05))


class TestRankineProfiles:
    def test_mu_branches(self):
        assert rankine_mu(0.5) == 0.5
        assert rankine_mu(2.0) == 0.25
        assert rankine_mu(1.0 - 1e-12) == pytest.approx(rankine_mu(1.0 + 1e-12),
                                                        abs=1e-9)

    def test_rotation_rate_matches_field(self):
        pts = np.array([[0.5, 0.0], [0.0, 2.0], [-3.0, 0.0]])
        u = rankine_velocity(pts)
        r = np.linalg.norm(pts, axis=1)
        utheta = (-u[:, 0] * pts[:, 1] + u[:, 1] * pts[:, 0]) / r**2
        assert np.allclose(utheta, rankine_rotation_rate(r))
        assert np.allclose(np.linalg.norm(u, axis=1), rankine_speed(r))


class TestBoundaryVelocity:
    def test_rankine_interior_point(self):
        u = boundary_velocity(rankine(1.0, 512).boundary, [[0.5, 0.0]])[0]
        assert np.allclose(u, [0.0, 0.25], atol=1e-4)  # u_theta = mu(0.5) = 1/2

    def test_rankine_exterior_point(self):
        # speed mu(2) = 1/4 on the r >= 1 branch
        u = boundary_velocity(rankine(1.0, 512).boundary, [[2.0, 0.0]])[0]
        assert np.allclose(u, [0.0, 0.25], atol=1e-4)

    def test_origin_fixed_for_threefold(self):
        u = boundary_velocity(small_armed().boundary, [[0.0, 0.0]])[0]
        assert np.linalg.norm(u) < 1e-10

    def test_polar_split_reconstructs(self, rng):
        c = small_armed().boundary
        pts = rng.normal(size=(50, 2)) * 1.5
        for s in velocity_samples(c, pts):
            x, y = s.position
            r = math.hypot(x, y)
            er = np.array([x, y]) / r
            et = np.array([-y, x]) / r
            rebuilt = s.u_r * er + r * s.u_theta * et
            assert np.allclose(rebuilt, s.u, atol=1e-12)

    def test_circulation_equals_mass(self):
        c = rankine(1.0, 512).boundary
        assert circulation(c, 5.0) == pytest.approx(math.pi, abs=1e-4)
        c2 = small_armed().boundary
        assert circulation(c2, 12.0) == pytest.approx(math.pi, abs=1e-4)


class TestStep:
    def test_rankine_is_steady(self):
        state = FlowState(0.0, rankine(1.0, 512).boundary, MarkerSet.empty())
        r0 = np.linalg.norm(state.contour.vertices, axis=1)
        for _ in range(5):
            state = step(state, 1e-2)
        r1 = np.linalg.norm(state.contour.vertices, axis=1)
        assert np.abs(r1 - r0).max() < 1e-8

    def test_cfl_violation_names_required_dt(self):
        state = FlowState(0.0, rankine(1.0, 256).boundary, MarkerSet.empty())
        dt_max = cfl_max_dt(state.contour)
        with pytest.raises(CFLError) as err:
            step(state, 10 * dt_max)
        assert err.value.dt_max == pytest.approx(dt_max, rel=1e-6)

    @pytest.mark.parametrize("make", [
        lambda: rankine(1.0, 128),
        lambda: kirchhoff_ellipse(2.0, 1.0, 128),
        small_armed,
    ])
    def test_fourth_order_convergence(self, make):
        p = make()

        def advance(dt, steps):
            s = FlowState(0.0, p.boundary, MarkerSet.empty())
            for _ in range(steps):
                s = step(s, dt, enforce_cfl=False)
            return s.contour.vertices

        x1 = advance(0.02, 8)
        x2 = advance(0.01, 16)
        x3 = advance(0.005, 32)
        e1 = np.abs(x1 - x2).max()
        e2 = np.abs(x2 - x3).max()
        assert math.log2(e1 / e2) >= 3.8

    def test_markers_follow_exact_rankine_orbits(self, rng):
        p = rankine(1.0, 512)
        markers = seed_markers([(0.3, 0.8, 8), (1.5, 2.5, 8)], rng, p)
        state = FlowState(0.0, p.boundary, markers)
        for _ in range(100):
            state = step(state, 1e-2)
        m = state.markers
        predicted = m.theta0 + 1.0 * rankine_rotation_rate(m.r0)
        assert np.abs(m.theta - predicted).max() < 1e-6
        assert np.abs(m.r - m.r0).max() < 1e-9


class TestRemesh:
    def test_uniformly_fine_contour_unchanged(self):
        c = rankine(1.0, 512).boundary
        c2 = remesh(c, 0.008, 0.05)
        assert np.array_equal(c.vertices, c2.vertices)

    def test_stretched_edge_split_preserves_area(self):
        v = rankine(1.0, 64).vertices.copy()
        c = Contour(np.delete(v, slice(3, 9), axis=0), check_simple=False)
        a0 = geometry.signed_area(c)
        c2 = remesh(c, 0.02, 0.09)
        assert abs(geometry.signed_area(c2) - a0) < 1e-8
        assert len(c2) > len(c)

    def test_spacing_bounds_hold(self):
        # filament-like frame: short armed run, then remesh with hmin below
        # the arm width (coarser hmin would have to destroy the feature)
        p = small_armed()
        s = FlowState(0.0, p.boundary, MarkerSet.empty())
        for _ in range(40):
            s = step(s, 0.01, enforce_cfl=False)
        a0 = geometry.signed_area(s.contour)
        c2 = remesh(s.contour, 0.004, 0.08)
        lengths = c2.edge_lengths()
        assert lengths.min() >= 0.004 * (1 - 1e-9)
        assert lengths.max() <= 0.08 * (1 + 1e-9)
        assert abs(geometry.signed_area(c2) - a0) < 1e-6
        assert c2.is_simple()

    def test_merge_preserves_area_exactly(self):
        # dense circle coarsened ~4x: many merges, compensated area
        c = rankine(1.0, 2048).boundary
        a0 = geometry.signed_area(c)
        c2 = remesh(c, 0.012, 0.05)
        assert len(c2) < len(c)
        assert abs(geometry.signed_area(c2) - a0) < 1e-10

    def test_bad_bounds_rejected(self):
        c = rankine(1.0, 64).boundary
        with pytest.raises(InvalidInputError):
            remesh(c, 0.1, 0.05)
        with pytest.raises(InvalidInputError):
            remesh(c, 0.04, 0.05)  # hmax < 2 hmin


class TestRun:
    def test_rankine_run_steady_perimeter(self):
        res = run(rankine(1.0, 512), None, T=2.0, dt=1e-2, frame_stride=50,
                  energy_stride=4)
        assert res.status == "ok"
        for s in res.states:
            assert abs(s.report.perimeter - 2 * math.pi) < 1e-3

    def test_conservation_short_kirchhoff(self):
        res = run(kirchhoff_ellipse(2.0, 1.0, 384), None, T=2.0, dt=1e-2,
                  frame_stride=50, energy_stride=2)
        r0, r1 = res.states[0].report, res.final.report
        assert abs(r1.mass - r0.mass) < 1e-6
        assert np.allclose(r1.center, r0.center, atol=1e-6)
        assert abs(r1.angular_momentum - r0.angular_momentum) \
            / r0.angular_momentum < 1e-4
        assert abs(r1.pseudo_energy - r0.pseudo_energy) \
            / abs(r0.pseudo_energy) < 1e-3

    def test_halts_on_self_intersection(self, monkeypatch):
        calls = {"n": 0}
        original = Contour.is_simple

        def fake_is_simple(self):
            calls["n"] += 1
            if calls["n"] > 1:
                return False
            return original(self)

        monkeypatch.setattr(Contour, "is_simple", fake_is_simple)
        res = run(rankine(1.0, 128), None, T=1.0, dt=1e-2, frame_stride=10)
        assert res.status == "self_intersection"
        assert "self-intersection" in res.message
        assert 0 < len(res.states) < 11

    def test_marker_count_constant(self, rng):
        p = rankine(1.0, 256)
        markers = seed_markers([(1.2, 1.6, 10)], rng, p)
        res = run(p, markers, T=0.5, dt=1e-2, frame_stride=10,
                  energy_stride=10)
        assert all(len(s.markers) == 10 for s in res.states)

    def test_input_validation(self):
        with pytest.raises(InvalidInputError):
            run(rankine(1.0, 64), None, T=-1.0, dt=0.01)


class TestVelocityDiagnostics:
    def test_rankine_all_norms_vanish(self):
        diag = velocity_diagnostics(rankine(1.0, 1024))
        assert diag["sup_dev"] < 2e-5
        assert diag["l2_utheta_minus_rate"] < 1e-4
        assert diag["l2_ur_over_r"] < 1e-4
        assert diag["sup_utheta"] == pytest.approx(0.5, abs=1e-3)

    def test_threefold_velocity_linear_near_origin(self):
        # |u(x)| <~ |x| near the origin under 3-fold symmetry
        p = small_armed()
        radii = np.array([1e-3, 3e-3, 1e-2, 3e-2])
        pts = np.column_stack([radii, np.zeros_like(radii)])
        u = boundary_velocity(p.boundary, pts)
        ratio = np.linalg.norm(u, axis=1) / radii
        assert ratio.max() < 1.0

    def test_armed_norms_positive_and_bounded(self):
        diag = velocity_diagnostics(small_armed())
        assert 0 < diag["sup_dev"] < 0.5
        assert diag["sup_utheta"] < 1.0
        assert diag["epsilon_tilde"] > 0
