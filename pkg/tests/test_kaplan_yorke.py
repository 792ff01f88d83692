import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from slowosc.feedback import HppParams, build_hpp_feedback, build_multiscale
from slowosc.kaplan_yorke import (ConservationError, find_ky_amplitude, hamiltonian,
                                  integrate_planar, ky_period4_trace, level_set_crossings,
                                  phase_plane, polyline_crossings, scan_tau_brackets, tau,
                                  tau_below_one, verify_tau_limits)

from conftest import EXAMPLE

# Reference values from an independent adaptive integrator (scipy DOP853,
# rtol 1e-13, terminal event u = 0), frozen here.
TAU_REF = {1.95: 0.6718749999999801, 2.0: 0.937567071565382, 2.5: 2.178234018243909,
           3.0: 2.7871359346699185}
KY_U0_REF = 2.0062524066044594


class TestHamiltonian:
    def test_origin(self, f_example):
        assert hamiltonian(f_example, 0.0, 0.0) == 0.0

    @pytest.mark.parametrize("u", [1e-3, 0.1, 0.5, 0.9])
    def test_quadratic_near_zero(self, f_example, u):
        assert hamiltonian(f_example, u, 0.0) == pytest.approx(u * u, rel=1e-14)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-6, 6), st.floats(-6, 6))
    def test_symmetries_and_positivity(self, u, v):
        assume(max(abs(u), abs(v)) > 1e-100)
        f = build_hpp_feedback(EXAMPLE, -2.0)
        h = hamiltonian(f, u, v)
        assert h == hamiltonian(f, v, u) == hamiltonian(f, -u, -v)
        assert h == hamiltonian(f, v, -u)
        if (u, v) != (0.0, 0.0):
            assert h > 0


class TestPlanar:
    def test_linear_circle(self, f_example):
        u0 = 0.1
        pl = integrate_planar(f_example, u0, 1.0, 1e-4)
        r = np.hypot(pl.u, pl.v)
        assert np.max(np.abs(r - u0)) < 1e-12
        # angular speed 2: u = u0 cos 2t, v = u0 sin 2t
        assert np.max(np.abs(pl.u - u0 * np.cos(2 * pl.t))) < 1e-12

    def test_quarter_turns(self, f_example):
        for u0 in (0.5, 2.0, 3.0):
            t = tau(f_example, u0).tau
            m = math.ceil(t / 1e-4)
            pl = integrate_planar(f_example, u0, 4 * t, t / m)
            assert pl.max_H_drift < 1e-8 * max(1.0, pl.H0)
            for q, target in ((1, (0.0, u0)), (2, (-u0, 0.0)), (3, (0.0, -u0)), (4, (u0, 0.0))):
                u, v = pl.u[q * m], pl.v[q * m]
                assert abs(u - target[0]) < 1e-7 and abs(v - target[1]) < 1e-7

    def test_box_closed_form(self, f_example):
        # from (3, 0): v = (2/3) t, u = 3 - (2/3) t^2 while inside the box
        pl = integrate_planar(f_example, 3.0, 1.0, 1e-4)
        t = pl.t
        assert np.max(np.abs(pl.v - 2 * t / 3)) < 1e-12
        assert np.max(np.abs(pl.u - (3 - 2 * t * t / 3))) < 1e-12
        assert abs(pl.u[-1] - 7 / 3) < 1e-8 and abs(pl.v[-1] - 2 / 3) < 1e-8

    def test_drift_breach_raises(self, f_example):
        with pytest.raises(ConservationError, match="refine"):
            integrate_planar(f_example, 3.0, 20.0, 0.05)

    def test_positive_start_required(self, f_example):
        with pytest.raises(ValueError):
            integrate_planar(f_example, 0.0, 1.0)


class TestTau:
    def test_small_amplitude_limit(self, f_example):
        r = tau(f_example, 1e-4)
        assert r.tau == pytest.approx(math.pi / 4, abs=1e-9)
        assert r.hit_refinement_width <= 1e-12

    @pytest.mark.parametrize("u0", sorted(TAU_REF))
    def test_against_reference_integrator(self, f_example, u0):
        assert tau(f_example, u0).tau == pytest.approx(TAU_REF[u0], abs=1e-9)

    def test_below_one_at_2a_minus_c(self, f_example):
        assert tau(f_example, 1.95).tau < 1

    def test_growth(self, f_example):
        assert tau(f_example, 40.0).tau > tau(f_example, 4.0).tau

    def test_continuity(self, f_example):
        rng = np.random.default_rng(7)
        kinks = f_example.kinks
        checked = 0
        while checked < 100:
            u = rng.uniform(1.95, 3.0)
            if np.min(np.abs(kinks - u)) < 1e-4:
                continue
            assert abs(tau(f_example, u).tau - tau(f_example, u + 1e-6).tau) < 1e-3
            checked += 1

    def test_vectorised_sign_agrees(self, f_example):
        us = np.array([0.5, 1.95, 2.0, 2.01, 2.5, 3.0])
        expect = [tau(f_example, u).tau < 1 for u in us]
        assert tau_below_one(f_example, us).tolist() == expect

    def test_limits_report(self, f_example):
        rep = verify_tau_limits(f_example)
        assert rep.limit == pytest.approx(math.pi / 4)
        assert rep.passed

    def test_limit_at_borderline_slope(self):
        f = build_hpp_feedback(HppParams(1.0, 0.05, 2 / 3, 4.0), -math.pi / 2)
        assert verify_tau_limits(f).limit == pytest.approx(1.0)

    def test_multiscale_uses_inner_slope(self):
        f = build_multiscale([5, 1], -2.0)
        rep = verify_tau_limits(f)
        assert rep.limit == pytest.approx(math.pi / 4)
        assert rep.small_ok


class TestKaplanYorke:
    @pytest.fixture(scope="class")
    @staticmethod
    def ky(f_example):
        return find_ky_amplitude(f_example, 1.95, 3.0, 1e-9)

    def test_root(self, ky):
        assert 1.95 < ky.u0 < 3.0
        assert abs(ky.tau - 1) < 1e-9
        assert ky.u0 == pytest.approx(KY_U0_REF, abs=1e-8)

    def test_solution_checks(self, ky):
        assert ky.symmetry_residual < 1e-6
        assert ky.dde_residual < 1e-4
        assert ky.replay_error < 1e-3
        assert abs(ky.period - 4) < 1e-6

    def test_trace_shape(self, ky):
        tr = ky.trace
        assert tr.t_end == pytest.approx(4.0)
        assert tr.zero_count == 2
        assert np.diff(tr.zeros)[0] == pytest.approx(2.0, abs=2e-3)
        pts = phase_plane(tr, 0.0, 4.0)
        # passes through (alpha, 0) at t = 0 and (0, alpha) at t = 1
        assert pts[0] == pytest.approx([ky.u0, 0.0], abs=1e-9)
        assert pts[1000] == pytest.approx([0.0, ky.u0], abs=1e-6)

    def test_bad_bracket(self, f_example):
        with pytest.raises(ValueError, match="no sign change"):
            find_ky_amplitude(f_example, 2.5, 3.0)

    def test_trace_needs_root(self, f_example):
        with pytest.raises(ValueError):
            ky_period4_trace(f_example, 2.5)

    def test_scan_finds_one_bracket(self, f_example):
        br = scan_tau_brackets(f_example)
        assert len(br) == 1
        lo, hi = br[0]
        assert lo < KY_U0_REF < hi

    def test_stable_slope_two_roots(self):
        f = build_hpp_feedback(EXAMPLE, -1.0)
        br = scan_tau_brackets(f)
        assert len(br) == 2
        small = find_ky_amplitude(f, *br[0])
        assert small.u0 < 1.95
        assert small.symmetry_residual < 1e-6


def test_polyline_crossings_simple():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], dtype=float)
    line = np.array([[-1, 0.5], [2, 0.5]])
    assert polyline_crossings(sq, line) == 2
    assert polyline_crossings(sq, line + [0, 5]) == 0


def test_level_set_crossings(f_example):
    pts = np.array([[0.1, 0.0], [3.0, 0.0], [0.1, 0.0]])
    lvl = hamiltonian(f_example, 2.0, 0.0)
    assert level_set_crossings(f_example, pts, lvl) == 2
