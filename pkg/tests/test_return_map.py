import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slowosc.dde import Segment, integrate, segment_at
from slowosc.feedback import HprimeParams, build_hpp_feedback, build_multiscale, build_plateau_feedback
from slowosc.return_map import (DECAY, SOP, ConeViolation, ConvergedToZero, NonConvergence,
                                VSetParams, apply_P, classify_orbit, find_multiple_sops,
                                iterate_to_fixed_point, locate_unstable_sop, membership_V,
                                random_cone_segment, random_v_segment, v_boundary,
                                verify_contraction_U, verify_V_invariance)

from conftest import EXAMPLE

VP = VSetParams(sigma=1.0, gamma_v=0.2, beta=0.1, mu=1.0)


class TestApplyP:
    def test_zero_maps_to_zero(self, f_example):
        assert apply_P(f_example, Segment.zero()).is_zero()

    def test_rejects_outside_cone(self, f_example):
        with pytest.raises(ConeViolation, match="phi\\(-1\\) = 0"):
            apply_P(f_example, Segment.constant(1.0))
        with pytest.raises(ConeViolation, match="nondecreasing"):
            apply_P(f_example, Segment(4, [0, 1, 0.5, 0.6, 0.7]))

    def test_decay_status(self, f_plateau):
        # tiny solutions still oscillate; with too few zeros in the horizon the
        # diagnostic separates "decayed" from "horizon_too_short"
        img, info = apply_P(f_plateau, Segment.ramp(1e-12), horizon=2.5, full_output=True)
        assert img.is_zero() and info["status"] == "decayed"
        img, info = apply_P(f_plateau, Segment.ramp(1e-12), horizon=200, full_output=True)
        assert info["status"] == "returned" and 0 < img.norm() < 1e-12

    def test_horizon_too_short(self, sop_example, f_example):
        img, info = apply_P(f_example, Segment.ramp(3.0), horizon=2.5, full_output=True)
        assert img.is_zero() and info["status"] == "horizon_too_short"

    def test_image_is_segment_after_second_zero(self, f_example):
        phi = Segment.ramp(3.0)
        tr = integrate(f_example, phi, 20)
        expected = segment_at(tr, tr.zeros[1] + 1.0, normalize=True, bound=f_example.bound)
        assert apply_P(f_example, phi).distance(expected) == 0.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.1, 4.0))
def test_P_maps_K_into_K(seed, amp):
    f = build_hpp_feedback(EXAMPLE, -2.0)
    phi = random_cone_segment(np.random.default_rng(seed), 400, amp)
    img = apply_P(f, phi)
    assert img.in_cone(bound=f.bound * (1 + 1e-9))


class TestFixedPoint:
    def test_example_sop(self, sop_example):
        assert sop_example.period > 4
        assert sop_example.amplitude > 3
        assert sop_example.residual < 1e-6
        assert sop_example.iterations <= 50

    def test_replay_returns_to_fixed_segment(self, f_example, sop_example):
        seg = sop_example.fixed_segment
        tr = integrate(f_example, seg, sop_example.period + 0.5)
        back = segment_at(tr, sop_example.period)
        assert back.distance(seg) < 10 * 1e-6

    def test_stable_zero_small_seed(self, f_plateau):
        with pytest.raises(ConvergedToZero):
            iterate_to_fixed_point(f_plateau, Segment.ramp(0.01))

    def test_non_convergence_carries_history(self, f_example):
        with pytest.raises(NonConvergence) as err:
            iterate_to_fixed_point(f_example, Segment.ramp(3.0), tol=1e-15, max_iter=3)
        assert len(err.value.residuals) == 3

    def test_multiscale_inner_sop(self):
        f = build_multiscale([5, 1])
        res = iterate_to_fixed_point(f, Segment.ramp(0.875))
        assert 0.75 < res.amplitude < 1.0
        assert res.period > 4


class TestMultiple:
    def test_two_scales_two_sops(self):
        f = build_multiscale([5, 1])
        res = find_multiple_sops(f, [Segment.ramp(4.0), Segment.ramp(0.8)])
        assert len(res) == 2
        assert res[0].amplitude > res[1].amplitude

    def test_same_attractor_deduplicated(self, f_example):
        res = find_multiple_sops(f_example, [Segment.ramp(3.0), Segment.ramp(3.5)])
        assert len(res) == 1

    def test_stable_linear_none(self):
        f = build_plateau_feedback(HprimeParams(0.5, 1.0, 0.5), -0.5)
        assert find_multiple_sops(f, [Segment.ramp(0.1), Segment.ramp(0.3)]) == []

    def test_permutation_invariant(self):
        f = build_multiscale([5, 1])
        seeds = [Segment.ramp(a) for a in (4.0, 0.8, 4.2, 0.9)]
        a = find_multiple_sops(f, seeds)
        b = find_multiple_sops(f, seeds[::-1])
        assert [(r.period, r.amplitude) == pytest.approx((s.period, s.amplitude), rel=1e-6)
                for r, s in zip(a, b)] == [True] * len(a)
        assert len(a) == len(b) == 2


class TestVSet:
    def test_params_checked(self):
        assert VP.violations() == []
        assert VSetParams(1.0, 0.95, 0.1, 1.0).violations()

    def test_full_ramp_in_V(self):
        assert membership_V(Segment.ramp(1.0), VP)

    def test_zero_not_in_closure(self):
        assert not membership_V(Segment.zero(), VP, closed=True)

    def test_boundary_graph(self):
        b = v_boundary(VP, 1000)
        assert not membership_V(b, VP)
        assert membership_V(b, VP, closed=True)

    def test_random_samples_in_closure(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            assert membership_V(random_v_segment(rng, VP, 500, 1.0), VP, closed=True)

    def test_invariance_plateau(self, f_plateau):
        rep = verify_V_invariance(f_plateau, VP, 20)
        assert rep.invariant and rep.constant_expected and rep.constant_ok

    def test_invariance_long_period_family(self, f_example):
        # mu = 4, beta = 1, sigma = 2/3 fails beta < sigma/(2 + mu/sigma) = 1/12
        vp = VSetParams(sigma=2 / 3, gamma_v=0.01, beta=1.0, mu=4.0)
        with pytest.raises(ValueError, match="precondition"):
            verify_V_invariance(f_example, vp, 5)

    def test_aux_inequality_rejected(self, f_plateau):
        with pytest.raises(ValueError, match="beta <="):
            verify_V_invariance(f_plateau, VSetParams(1.0, 0.5, 0.3, 1.0), 5)


class TestContraction:
    def test_half_slope(self):
        f = build_plateau_feedback(HprimeParams(1.0, 0.1, 1.0), -0.5)
        rep = verify_contraction_U(f, 0.5 * f.first_piece_width(), 30)
        assert rep.passed and rep.skipped >= 1

    def test_steep_slope_rejected(self, f_example):
        with pytest.raises(ValueError):
            verify_contraction_U(f_example, 0.1, 5)


def test_continuity_probe(f_example):
    rng = np.random.default_rng(11)
    for _ in range(10):
        phi = random_cone_segment(rng, 1000, rng.uniform(0.5, 3.5))
        bump = np.concatenate(([0.0], np.cumsum(rng.uniform(0, 1e-9, 1000))))
        psi = Segment(1000, phi.values + bump)
        assert psi.distance(phi) < 1e-6
        assert apply_P(f_example, phi).distance(apply_P(f_example, psi)) < 1e-3


def test_P_constant_near_fixed_point(f_example, sop_example):
    # perturbations keeping the segment monotone and above the V-like graph map to one image
    rng = np.random.default_rng(5)
    seg = sop_example.fixed_segment
    images = []
    for _ in range(20):
        bump = np.concatenate(([0.0], np.cumsum(rng.uniform(0, 1e-4, seg.n))))
        phi = Segment(seg.n, np.minimum(seg.values + bump, f_example.bound))
        images.append(apply_P(f_example, phi))
    spread = max(im.distance(images[0]) for im in images)
    assert spread < 10 * seg.h * 4.0


class TestBoundary:
    def test_classification_endpoints(self, f_plateau, sop_plateau):
        small = integrate(f_plateau, Segment.ramp(0.05), 150)
        big = integrate(f_plateau, Segment.ramp(0.08), 150)
        assert classify_orbit(small, sop_plateau, 0.01) == DECAY
        assert classify_orbit(big, sop_plateau, 0.01) == SOP

    def test_bisection(self, f_plateau, sop_plateau):
        w = locate_unstable_sop(f_plateau, Segment.ramp(0.05), Segment.ramp(0.08), 150, 22,
                                decay_level=0.01, reference=sop_plateau)
        assert 0 < w.s_star < 1
        assert w.bracket_width < 2.0 ** -20
        lo, hi = w.amplitude_band
        assert lo < w.amplitude < hi
        assert w.persistence > 20

    def test_same_class_rejected(self, f_plateau, sop_plateau):
        with pytest.raises(ValueError, match="straddle"):
            locate_unstable_sop(f_plateau, Segment.ramp(0.01), Segment.ramp(0.02), 100, 5,
                                decay_level=0.01, reference=sop_plateau)
