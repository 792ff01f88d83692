"""The return map P on the cone K and its fixed points.

P sends a nondecreasing segment phi with phi(-1) = 0 to the solution segment
one delay after the second positive zero, or to 0 when there is no second
zero. Nonzero fixed points of P are slowly oscillating periodic solutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dde import (DEFAULT_HORIZON, NumericalError, Segment, SolutionTrace,
                  _make_trace, integrate, segment_at)
from .feedback import FeedbackFn, HprimeParams, check_hprime

__all__ = [
    "SOPResult", "VSetParams", "ConvergedToZero", "NonConvergence",
    "ConeViolation", "apply_P", "iterate_to_fixed_point", "find_multiple_sops",
    "membership_V", "v_boundary", "random_v_segment", "random_cone_segment",
    "verify_V_invariance", "verify_contraction_U", "InvarianceReport",
    "ContractionReport", "classify_orbit", "locate_unstable_sop",
    "BoundaryWitness", "one_period_trace", "EdgeTrack", "edge_track",
]

DECAYED = "decayed"
HORIZON_TOO_SHORT = "horizon_too_short"
RETURNED = "returned"


class ConeViolation(ValueError):
    pass


class ConvergedToZero(RuntimeError):
    """Iteration collapsed onto the trivial fixed point."""

    def __init__(self, iterations, norms):
        super().__init__(f"iterates collapsed to 0 after {iterations} steps")
        self.iterations = iterations
        self.norms = norms


class NonConvergence(RuntimeError):
    def __init__(self, residuals):
        super().__init__(f"no convergence in {len(residuals)} iterations "
                         f"(last residual {residuals[-1]:.3g})")
        self.residuals = residuals


def apply_P(f: FeedbackFn, phi: Segment, horizon: float = DEFAULT_HORIZON,
            full_output: bool = False):
    """Apply the return map once.

    Returns the image segment, or ``(segment, info)`` when ``full_output``
    is set; ``info["status"]`` is one of ``"returned"``, ``"decayed"`` (fewer
    than two zeros and the solution has died out below 1e-9) or
    ``"horizon_too_short"``.
    """
    if horizon <= 2:
        raise ValueError("horizon must exceed 2")
    bad = phi.cone_violations(f.bound * (1 + 1e-12))
    if bad:
        raise ConeViolation("segment not in K: violates " + ", ".join(bad))
    if phi.is_zero():
        out = Segment.zero(phi.n)
        return (out, {"status": RETURNED, "trace": None}) if full_output else out
    trace = integrate(f, phi, horizon, stop_after_zeros=2)
    if trace.zero_count >= 2:
        out = segment_at(trace, trace.zeros[1] + 1.0, normalize=True, bound=f.bound)
        status = RETURNED
    else:
        out = Segment.zero(phi.n)
        tail = trace.samples[-phi.n - 1:]
        status = DECAYED if np.max(np.abs(tail)) < 1e-9 else HORIZON_TOO_SHORT
    if full_output:
        return out, {"status": status, "trace": trace}
    return out


@dataclass(frozen=True, eq=False)
class SOPResult:
    """A converged nonzero fixed point of P."""

    fixed_segment: Segment
    period: float
    amplitude: float
    iterations: int
    residual: float
    trace: SolutionTrace = field(repr=False)
    residuals: tuple[float, ...] = field(default=(), repr=False)

    def same_orbit(self, other: "SOPResult", rel: float = 1e-3) -> bool:
        return (abs(self.period - other.period) < rel * self.period
                and abs(self.amplitude - other.amplitude) < rel * self.amplitude)


def one_period_trace(f: FeedbackFn, phi: Segment, horizon: float = DEFAULT_HORIZON):
    """Integrate from ``phi`` to two zeros past 0; returns ``(trace, period)``.

    For a fixed point of P the period is z2 + 1, since phi(-1) = 0.
    """
    trace = integrate(f, phi, horizon, stop_after_zeros=2)
    if trace.zero_count < 2:
        raise NumericalError("segment has fewer than two zeros within the horizon")
    return trace, float(trace.zeros[1] + 1.0)


def iterate_to_fixed_point(f: FeedbackFn, phi0: Segment, tol: float = 1e-6,
                           max_iter: int = 50, horizon: float = DEFAULT_HORIZON,
                           zero_level: float = 1e-9) -> SOPResult:
    """Iterate phi <- P(phi) until successive iterates agree to ``tol``.

    Raises
    ------
    ConvergedToZero
        The iterates fell below ``zero_level`` (or converged onto a segment
        no larger than ``10*tol``).
    NonConvergence
        ``max_iter`` was exhausted; carries the residual history.
    """
    if phi0.is_zero():
        raise ValueError("seed must be nonzero")
    phi = phi0
    residuals = []
    norms = [phi.norm()]
    for it in range(1, max_iter + 1):
        nxt = apply_P(f, phi, horizon)
        res = nxt.distance(phi)
        residuals.append(res)
        norms.append(nxt.norm())
        phi = nxt
        if phi.norm() < zero_level:
            raise ConvergedToZero(it, norms)
        if res < tol:
            if phi.norm() <= 10 * tol:
                raise ConvergedToZero(it, norms)
            trace, period = one_period_trace(f, phi, horizon)
            k_end = int(math.ceil((period + 1.0) * phi.n))
            amp = float(np.max(np.abs(trace.samples[: k_end + 1])))
            return SOPResult(phi, period, amp, it, res, trace, tuple(residuals))
    raise NonConvergence(residuals)


def find_multiple_sops(f: FeedbackFn, seeds, tol: float = 1e-6, max_iter: int = 50,
                       horizon: float = DEFAULT_HORIZON, rel: float = 1e-3) -> list[SOPResult]:
    """Distinct SOPs reached from ``seeds``, sorted by decreasing amplitude.

    Seeds that collapse to 0 or fail to converge contribute nothing.
    """
    found: list[SOPResult] = []
    for seed in seeds:
        try:
            res = iterate_to_fixed_point(f, seed, tol, max_iter, horizon)
        except (ConvergedToZero, NonConvergence):
            continue
        for k, old in enumerate(found):
            if old.same_orbit(res, rel):
                if (res.residual, -res.amplitude) < (old.residual, -old.amplitude):
                    found[k] = res
                break
        else:
            found.append(res)
    return sorted(found, key=lambda r: -r.amplitude)


# -- the invariant set V and the contraction neighbourhood U ----------------

@dataclass(frozen=True)
class VSetParams:
    """Shape of V: phi(t) > sigma*t + sigma*(1 - gamma_v) on [-1+gamma_v, -beta/sigma].

    ``gamma_v`` is the small width parameter of V (distinct from the plateau
    height gamma of the long-period family); ``mu`` bounds |f|.
    """
    sigma: float
    gamma_v: float
    beta: float
    mu: float

    def violations(self) -> list[str]:
        bad = []
        if not self.gamma_v + self.beta / self.sigma < 1:
            bad.append("gamma_v + beta/sigma < 1")
        rhs = (self.sigma - (self.sigma + self.mu) * self.gamma_v) / (2 + self.mu / self.sigma)
        if not self.beta <= rhs:
            bad.append(f"beta <= {rhs:.6g}")
        return bad


def _v_window(n: int, vp: VSetParams):
    t = -1.0 + np.arange(n + 1) / n
    lo = -1.0 + vp.gamma_v
    hi = -vp.beta / vp.sigma
    mask = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    return t, mask


def v_boundary(vp: VSetParams, n: int) -> Segment:
    """Lowest member of the closure of V: zero, then slope sigma, then flat."""
    t = -1.0 + np.arange(n + 1) / n
    line = vp.sigma * t + vp.sigma * (1 - vp.gamma_v)
    top = vp.sigma * (1 - vp.gamma_v) - vp.beta
    vals = np.where(t <= -vp.beta / vp.sigma, np.maximum(line, 0.0), top)
    return Segment(n, vals)


def membership_V(phi: Segment, vp: VSetParams, closed: bool = False) -> bool:
    """Grid-node test of phi in V (strict) or its closure (``closed=True``)."""
    if not phi.in_cone():
        return False
    t, mask = _v_window(phi.n, vp)
    line = vp.sigma * t[mask] + vp.sigma * (1 - vp.gamma_v)
    vals = phi.values[mask]
    return bool(np.all(vals >= line) if closed else np.all(vals > line))


def random_cone_segment(rng: np.random.Generator, n: int, amplitude: float) -> Segment:
    """Random nondecreasing segment from 0 at s = -1 up to ``amplitude``."""
    steps = rng.exponential(size=n) * (rng.random(n) < rng.uniform(0.05, 1.0))
    if not steps.any():
        steps[-1] = 1.0
    vals = np.concatenate(([0.0], np.cumsum(steps)))
    return Segment(n, amplitude * vals / vals[-1])


def random_v_segment(rng: np.random.Generator, vp: VSetParams, n: int, bound: float) -> Segment:
    """Boundary graph plus a random nondecreasing bump, clipped at ``bound``."""
    base = v_boundary(vp, n).values
    bump = random_cone_segment(rng, n, rng.uniform(0.0, bound)).values
    return Segment(n, np.minimum(base + bump, bound))


@dataclass(frozen=True)
class InvarianceReport:
    n_samples: int
    failures: tuple[tuple[int, str], ...]
    image_spread: float
    constant_expected: bool
    constant_tolerance: float

    @property
    def invariant(self) -> bool:
        return not self.failures

    @property
    def constant_ok(self) -> bool:
        return self.image_spread <= self.constant_tolerance

    @property
    def passed(self) -> bool:
        return self.invariant and (self.constant_ok or not self.constant_expected)


def verify_V_invariance(f: FeedbackFn, vp: VSetParams, n_samples: int = 100, *,
                        n: int = 1000, seed: int = 0,
                        horizon: float = DEFAULT_HORIZON) -> InvarianceReport:
    """Sample the closure of V and check that P maps every sample into V.

    When f is constant on [beta, inf) the images should also coincide; the
    spread (max sup-distance to the first image) is reported against
    ``10*h*mu``.
    """
    bad = vp.violations()
    hp = HprimeParams(vp.mu, vp.beta, vp.sigma)
    if not hp.admits_two_sops():
        bad.append(f"beta < sigma/(2 + mu/sigma) = {hp.two_sop_bound:.6g}")
    if not check_hprime(f, hp):
        bad.append("f satisfies the plateau hypothesis with (mu, beta, sigma)")
    if bad:
        raise ValueError("precondition failed: " + "; ".join(bad))
    rng = np.random.default_rng(seed)
    failures = []
    images = []
    for i in range(n_samples):
        phi = random_v_segment(rng, vp, n, vp.mu)
        img = apply_P(f, phi, horizon)
        images.append(img.values)
        if not membership_V(img, vp):
            failures.append((i, "image not in V"))
    stack = np.array(images)
    spread = float(np.max(np.abs(stack - stack[0]))) if n_samples else 0.0
    return InvarianceReport(n_samples, tuple(failures), spread,
                            f.is_constant_beyond(vp.beta), 10.0 * vp.mu / n)


@dataclass(frozen=True)
class ContractionReport:
    n_samples: int
    checked: int
    skipped: int
    failures: tuple[tuple[int, float, float], ...]
    max_ratio: float

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_contraction_U(f: FeedbackFn, epsilon: float, n_samples: int = 100, *,
                         n: int = 1000, seed: int = 0, include_zero: bool = True,
                         horizon: float = DEFAULT_HORIZON) -> ContractionReport:
    """Check ||P(phi)|| < ||phi|| for random phi in K with ||phi|| <= epsilon."""
    if not abs(f.slope0) < 1:
        raise ValueError("contraction check needs |f'(0)| < 1")
    if not 0 < epsilon <= f.first_piece_width():
        raise ValueError("epsilon must lie within the first linear piece of f")
    rng = np.random.default_rng(seed)
    failures = []
    checked = skipped = 0
    worst = 0.0
    samples = [Segment.zero(n)] if include_zero else []
    while len(samples) < n_samples:
        samples.append(random_cone_segment(rng, n, epsilon * rng.uniform(0.01, 1.0)))
    for i, phi in enumerate(samples):
        if phi.is_zero():
            skipped += 1
            continue
        img = apply_P(f, phi, horizon)
        if img.is_zero():
            skipped += 1
            continue
        checked += 1
        ratio = img.norm() / phi.norm()
        worst = max(worst, ratio)
        if not ratio < 1:
            failures.append((i, phi.norm(), img.norm()))
    return ContractionReport(len(samples), checked, skipped, tuple(failures), worst)


# -- basin boundary between the trivial solution and a stable SOP ------------

DECAY = "DECAY"
SOP = "SOP"
UNDECIDED = "UNDECIDED"


def _half_cycle_peaks(trace: SolutionTrace):
    """Peak |x| on each interval between consecutive zeros (t >= 0)."""
    z = trace.zeros
    if z.size < 2:
        return z, np.empty(0)
    n = trace.n
    idx = np.clip(np.round((z + 1.0) * n).astype(int), 0, trace.samples.size - 1)
    peaks = np.array([np.max(np.abs(trace.samples[i:j + 1])) for i, j in zip(idx[:-1], idx[1:])])
    return z, peaks


def classify_orbit(trace: SolutionTrace, reference: SOPResult, decay_level: float,
                   rel: float = 0.01) -> str:
    """DECAY if sup |x| over the last 5 time units is below ``decay_level``;
    SOP if the last full cycle matches the reference period and amplitude
    within ``rel``; otherwise UNDECIDED."""
    n = trace.n
    if np.max(np.abs(trace.samples[-5 * n - 1:])) < decay_level:
        return DECAY
    z = trace.zeros
    if z.size >= 3:
        period = z[-1] - z[-3]
        i0 = int(round((z[-3] + 1.0) * n))
        amp = float(np.max(np.abs(trace.samples[i0:])))
        if (abs(period - reference.period) < rel * reference.period
                and abs(amp - reference.amplitude) < rel * reference.amplitude):
            return SOP
    return UNDECIDED


@dataclass(frozen=True, eq=False)
class BoundaryWitness:
    """Result of the basin-boundary bisection.

    ``persistence`` is measured on the single orbit from ``segment`` (the
    decay end of the final bracket); ``quasi_period`` and ``amplitude`` come
    from the stretch where the two bracket orbits still agree.
    """

    s_star: float
    s_decay: float
    s_sop: float
    segment: Segment
    quasi_period: float
    amplitude: float
    persistence: float
    amplitude_band: tuple[float, float]
    transcript: tuple[tuple[float, str], ...] = field(repr=False)
    trace: SolutionTrace | None = field(default=None, repr=False)
    segment_sop: Segment | None = field(default=None, repr=False)

    @property
    def bracket_width(self) -> float:
        return abs(self.s_sop - self.s_decay)


def _window_peaks(trace: SolutionTrace):
    """Peaks of |x| on [0, z1], [z1, z2], ...; returns (ends, peaks)."""
    n = trace.n
    z = trace.zeros
    ends = np.concatenate(([0.0], z))
    idx = np.clip(np.round((ends + 1.0) * n).astype(int), n, trace.samples.size - 1)
    peaks = np.array([np.max(np.abs(trace.samples[i:j + 1])) for i, j in zip(idx[:-1], idx[1:])])
    return ends, peaks


def _lingering(trace: SolutionTrace, low: float, high: float) -> float:
    """Time from 0 during which every half-cycle peak lies strictly in (low, high)."""
    ends, peaks = _window_peaks(trace)
    if peaks.size == 0:
        return 0.0
    inside = (peaks > low) & (peaks < high)
    stop = peaks.size if inside.all() else int(np.argmin(inside))
    return float(ends[stop])


def _shadow_cycle(tr_a: SolutionTrace, tr_b: SolutionTrace, rel: float = 0.01):
    """Quasi-period and peak of the last cycle on which both orbits agree."""
    za, pa = _half_cycle_peaks(tr_a)
    zb, pb = _half_cycle_peaks(tr_b)
    m = min(pa.size, pb.size)
    if m < 2:
        return float("nan"), float("nan")
    agree = np.abs(pa[:m] - pb[:m]) <= rel * np.maximum(pa[:m], pb[:m])
    k = m if agree.all() else int(np.argmin(agree))
    if k < 2:
        return float("nan"), float("nan")
    return float(za[k] - za[k - 2]), float(np.max(pa[k - 2:k]))


def locate_unstable_sop(f: FeedbackFn, phi_small: Segment, phi_big: Segment,
                        T_classify: float = 300.0, n_bisect: int = 30, *,
                        decay_level: float, reference: SOPResult | None = None,
                        tol: float = 1e-6, max_extend: int = 2) -> BoundaryWitness:
    """Bisect the segment family (1-s)*phi_small + s*phi_big for the basin boundary.

    Each member is classified by integrating to ``T_classify`` (doubled up to
    ``max_extend`` times while undecided). The witness orbit is the member at
    the decay end of the final bracket. Its persistence is the time from 0
    for which its half-cycle peaks stay strictly between ``0.1*decay_level``
    and 99% of the stable amplitude.
    """
    if reference is None:
        reference = iterate_to_fixed_point(f, phi_big, tol)
    transcript = []

    def member(s):
        return Segment(phi_small.n, (1 - s) * phi_small.values + s * phi_big.values)

    def classify(s):
        cls = _classify_segment(f, member(s), reference, decay_level, T_classify, max_extend)
        transcript.append((s, cls))
        return cls

    lo_cls = classify(0.0)
    hi_cls = classify(1.0)
    if lo_cls == hi_cls or UNDECIDED in (lo_cls, hi_cls):
        raise ValueError(f"endpoints do not straddle the boundary: {transcript}")
    s_dec, s_sop = (0.0, 1.0) if lo_cls == DECAY else (1.0, 0.0)
    for _ in range(n_bisect):
        mid = 0.5 * (s_dec + s_sop)
        if mid in (s_dec, s_sop):
            break  # bracket at floating-point resolution
        cls = classify(mid)
        if cls == DECAY:
            s_dec = mid
        elif cls == SOP:
            s_sop = mid
        else:
            # undecided after extension: the boundary is resolved to this point
            s_dec = s_sop = mid
            break
    s_star = 0.5 * (s_dec + s_sop)
    seg = member(s_dec)
    trace = integrate(f, seg, 4 * T_classify)
    band = (0.1 * decay_level, 0.99 * reference.amplitude)
    persistence = _lingering(trace, *band)
    seg_sop = member(s_sop)
    quasi, amp = _shadow_cycle(trace, integrate(f, seg_sop, 4 * T_classify))
    return BoundaryWitness(s_star, s_dec, s_sop, seg, quasi, amp, persistence,
                           band, tuple(transcript), trace, seg_sop)


def _classify_segment(f, seg, reference, decay_level, T, max_extend):
    for _ in range(max_extend + 1):
        cls = classify_orbit(integrate(f, seg, T), reference, decay_level)
        if cls != UNDECIDED:
            return cls
        T *= 2
    return UNDECIDED


@dataclass(frozen=True, eq=False)
class EdgeTrack:
    """Pseudo-orbit kept on the basin boundary by repeated re-bisection.

    ``samples`` concatenates true orbit pieces of length ``restart``; each
    restart moves the state by at most ``max_jump`` in sup-norm.
    """

    n: int
    samples: np.ndarray = field(repr=False)
    restarts: int
    max_jump: float
    duration: float
    persistence: float
    amplitude_band: tuple[float, float]

    @property
    def times(self) -> np.ndarray:
        return -1.0 + np.arange(self.samples.size) / self.n


def edge_track(f: FeedbackFn, witness: BoundaryWitness, reference: SOPResult,
               duration: float = 100.0, restart: float = 10.0, n_bisect: int = 45, *,
               decay_level: float, T_classify: float = 150.0) -> EdgeTrack:
    """Follow the basin boundary past the single-orbit horizon.

    Every ``restart`` time units the two bracket orbits are cut at the same
    grid time and the segment family between them is bisected again. This
    is the usual edge-tracking construction; it certifies nothing beyond the
    reported jump sizes.
    """
    n = witness.segment.n
    steps = int(round(restart * n))
    if steps < n:
        raise ValueError("restart interval must be at least one delay")
    lo, hi = witness.segment, witness.segment_sop
    pieces = [lo.values]
    jumps = []
    t = 0.0
    restarts = 0
    while t < duration:
        tr_lo = integrate(f, lo, restart)
        tr_hi = integrate(f, hi, restart)
        pieces.append(tr_lo.samples[n + 1:])
        t += restart
        if t >= duration:
            break
        end_lo = Segment(n, tr_lo.samples[-(n + 1):])
        end_hi = Segment(n, tr_hi.samples[-(n + 1):])
        s_dec, s_sop = 0.0, 1.0
        for _ in range(n_bisect):
            mid = 0.5 * (s_dec + s_sop)
            if mid in (s_dec, s_sop):
                break
            m = Segment(n, (1 - mid) * end_lo.values + mid * end_hi.values)
            cls = _classify_segment(f, m, reference, decay_level, T_classify, 1)
            if cls == SOP:
                s_sop = mid
            else:
                s_dec = mid
        lo = Segment(n, (1 - s_dec) * end_lo.values + s_dec * end_hi.values)
        hi = Segment(n, (1 - s_sop) * end_lo.values + s_sop * end_hi.values)
        jumps.append(lo.distance(end_lo))
        restarts += 1
    samples = np.concatenate(pieces)
    band = (0.1 * decay_level, 0.99 * reference.amplitude)
    pseudo = _make_trace(n, samples)
    return EdgeTrack(n, samples, restarts, float(max(jumps, default=0.0)), t,
                     _lingering(pseudo, *band), band)
