"""Planar reduction u' = f(v), v' = -f(u) and period-4 solutions.

For odd f, a solution of the planar system whose quarter-turn time is 1
gives a period-4 solution x(t) = u(t) of the delay equation with
x(t) = -x(t-2). The quarter-turn time tau(u0) is the first time the orbit
started at (u0, 0) reaches the v-axis.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .dde import DEFAULT_N, Segment, SolutionTrace, _make_trace, integrate
from .feedback import FeedbackFn

__all__ = [
    "hamiltonian", "PlanarTrace", "TauResult", "ConservationError",
    "integrate_planar", "tau", "tau_below_one", "scan_tau_brackets",
    "find_ky_amplitude", "find_all_ky_amplitudes", "KYSolution",
    "verify_tau_limits", "TauLimitReport", "ky_period4_trace",
    "phase_plane", "polyline_crossings", "level_set_crossings",
    "DEFAULT_STEP",
]

DEFAULT_STEP = 1e-4


class ConservationError(RuntimeError):
    """Hamiltonian drift exceeded tolerance; reduce the step."""


def hamiltonian(f: FeedbackFn, u, v):
    """H(u, v) = -G(u) - G(v) with G the exact antiderivative of f."""
    if np.ndim(u) == 0 and np.ndim(v) == 0:
        return -f.scalar_primitive(float(u)) - f.scalar_primitive(float(v))
    return -f.primitive(u) - f.primitive(v)


def _rk4(fs, u, v, dt):
    k1u = fs(v)
    k1v = -fs(u)
    k2u = fs(v + 0.5 * dt * k1v)
    k2v = -fs(u + 0.5 * dt * k1u)
    k3u = fs(v + 0.5 * dt * k2v)
    k3v = -fs(u + 0.5 * dt * k2u)
    k4u = fs(v + dt * k3v)
    k4v = -fs(u + dt * k3u)
    return (u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u),
            v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v))


class _Stepper:
    """RK4 step that lands on kinks of f instead of stepping across them.

    A step whose endpoint lies in a different linear piece of f (in u or v)
    is split at the crossing, located by bisection on the sub-step length;
    each sub-step then sees a linear right-hand side.
    """

    def __init__(self, f: FeedbackFn, width: float = 1e-15):
        self.fs = f.scalar
        self.kinks = f.kinks.tolist()
        self.width = width

    def _piece(self, x):
        return bisect.bisect_left(self.kinks, x)

    def __call__(self, u, v, dt):
        fs = self.fs
        while True:
            un, vn = _rk4(fs, u, v, dt)
            pu, pv = self._piece(u), self._piece(v)
            if self._piece(un) == pu and self._piece(vn) == pv:
                return un, vn
            lo, hi = 0.0, dt
            while hi - lo > self.width * max(1.0, dt):
                mid = 0.5 * (lo + hi)
                um, vm = _rk4(fs, u, v, mid)
                if self._piece(um) == pu and self._piece(vm) == pv:
                    lo = mid
                else:
                    hi = mid
            if hi >= dt:
                return un, vn
            u, v = _rk4(fs, u, v, hi)
            dt -= hi


@dataclass(frozen=True, eq=False)
class PlanarTrace:
    step: float
    t: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    H0: float
    max_H_drift: float


def integrate_planar(f: FeedbackFn, u0: float, t_max: float, step: float = DEFAULT_STEP,
                     drift_tol: float | None = 1e-8) -> PlanarTrace:
    """Classical RK4 from (u0, 0) on [0, t_max] at fixed ``step``.

    ``drift_tol`` is relative: the run fails with :class:`ConservationError`
    if max |H - H0| exceeds ``drift_tol * max(1, H0)``. Pass None to skip.
    """
    if not u0 > 0:
        raise ValueError("u0 must be positive")
    nsteps = int(math.ceil(t_max / step - 1e-9))
    u = np.empty(nsteps + 1)
    v = np.empty(nsteps + 1)
    u[0], v[0] = u0, 0.0
    stepper = _Stepper(f)
    uk, vk = float(u0), 0.0
    for k in range(nsteps):
        uk, vk = stepper(uk, vk, step)
        u[k + 1] = uk
        v[k + 1] = vk
    H = hamiltonian(f, u, v)
    H0 = hamiltonian(f, u0, 0.0)
    drift = float(np.max(np.abs(H - H0)))
    if drift_tol is not None and drift > drift_tol * max(1.0, H0):
        raise ConservationError(
            f"Hamiltonian drift {drift:.3g} exceeds tolerance at step {step}; refine the step")
    return PlanarTrace(step, np.arange(nsteps + 1) * step, u, v, H, H0, drift)


@dataclass(frozen=True)
class TauResult:
    u0: float
    tau: float
    hit_refinement_width: float
    v_at_hit: float = float("nan")


def tau(f: FeedbackFn, u0: float, step: float = DEFAULT_STEP, t_max: float | None = None,
        width: float = 1e-12) -> TauResult:
    """First time the orbit from (u0, 0) reaches u = 0.

    March with RK4 until u changes sign, then bisect the length of a single
    sub-step from the last node until the bracket is below ``width``.
    """
    if not u0 > 0:
        raise ValueError("u0 must be positive")
    if t_max is None:
        t_max = 50.0 + 100.0 * u0 / abs(f.tail_value)
    stepper = _Stepper(f)
    u, v = float(u0), 0.0
    k = 0
    nmax = int(math.ceil(t_max / step))
    while k < nmax:
        un, vn = stepper(u, v, step)
        if un <= 0.0:
            break
        u, v = un, vn
        k += 1
    else:
        raise RuntimeError(f"no axis crossing within t_max = {t_max}")
    lo, hi = 0.0, step
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        um, _ = stepper(u, v, mid)
        if um > 0.0:
            lo = mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    _, vh = stepper(u, v, s)
    return TauResult(u0, k * step + s, hi - lo, vh)


def tau_below_one(f: FeedbackFn, u0s, step: float = DEFAULT_STEP) -> np.ndarray:
    """Vectorised sign test: True where the orbit from (u0, 0) hits u = 0 before t = 1."""
    u = np.array(u0s, dtype=float)
    v = np.zeros_like(u)
    hit = np.zeros(u.shape, dtype=bool)
    for _ in range(int(round(1.0 / step))):
        u, v = _rk4(f, u, v, step)
        hit |= u <= 0.0
    return hit


def scan_tau_brackets(f: FeedbackFn, u_lo: float | None = None, u_hi: float | None = None,
                      num: int = 200, step: float = DEFAULT_STEP) -> list[tuple[float, float]]:
    """Brackets of tau(u0) = 1 from a geometric grid of amplitudes.

    Default grid: 1e-3 times the first-piece width up to 10 * X_max.
    """
    if u_lo is None:
        u_lo = 1e-3 * f.first_piece_width()
    if u_hi is None:
        u_hi = 10.0 * f.x_max
    grid = np.geomspace(u_lo, u_hi, num)
    below = tau_below_one(f, grid, step)
    flips = np.flatnonzero(below[:-1] != below[1:])
    return [(float(grid[i]), float(grid[i + 1])) for i in flips]


@dataclass(frozen=True, eq=False)
class KYSolution:
    u0: float
    tau: float
    iterations: int
    symmetry_residual: float
    dde_residual: float
    replay_error: float
    trace: SolutionTrace = field(repr=False)
    planar: PlanarTrace = field(repr=False)

    @property
    def period(self) -> float:
        return 4.0 * self.tau


def find_ky_amplitude(f: FeedbackFn, bracket_lo: float, bracket_hi: float, tol: float = 1e-9,
                      step: float = DEFAULT_STEP, n: int = DEFAULT_N,
                      max_iter: int = 200) -> KYSolution:
    """Bisect tau(u0) = 1 inside the bracket and verify the resulting solution.

    Raises ValueError (with both tau values) when tau - 1 has the same sign
    at the two ends.
    """
    t_lo = tau(f, bracket_lo, step).tau
    t_hi = tau(f, bracket_hi, step).tau
    if (t_lo - 1.0) * (t_hi - 1.0) > 0:
        raise ValueError(f"no sign change of tau - 1: tau({bracket_lo}) = {t_lo:.12g}, "
                         f"tau({bracket_hi}) = {t_hi:.12g}")
    lo, hi = bracket_lo, bracket_hi
    s_lo = t_lo < 1.0
    best = (abs(t_lo - 1.0), bracket_lo, t_lo) if abs(t_lo - 1) < abs(t_hi - 1) else (abs(t_hi - 1.0), bracket_hi, t_hi)
    it = 0
    while best[0] >= tol and it < max_iter:
        it += 1
        mid = 0.5 * (lo + hi)
        tm = tau(f, mid, step).tau
        if abs(tm - 1.0) < best[0]:
            best = (abs(tm - 1.0), mid, tm)
        if (tm < 1.0) == s_lo:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(hi)):
            break
    _, u0, t0 = best
    trace, planar = ky_period4_trace(f, u0, step=step, n=n, tol=max(tol, abs(t0 - 1.0)) * 10)
    sym, res, replay = _ky_checks(f, trace, planar, n)
    return KYSolution(u0, t0, it, sym, res, replay, trace, planar)


def find_all_ky_amplitudes(f: FeedbackFn, tol: float = 1e-9, **scan_kw) -> list[KYSolution]:
    return [find_ky_amplitude(f, lo, hi, tol) for lo, hi in scan_tau_brackets(f, **scan_kw)]


def ky_period4_trace(f: FeedbackFn, u0: float, step: float = DEFAULT_STEP, n: int = DEFAULT_N,
                     tol: float = 1e-6):
    """Period-4 delay solution x(t) = u(t; u0) sampled on [-1, 4] with step 1/n.

    For t in [-1, 0] the quarter-turn symmetry gives x(t) = v(t + 1).
    Returns ``(trace, planar)``.
    """
    tr = tau(f, u0, step)
    if abs(tr.tau - 1.0) >= tol:
        raise ValueError(f"tau({u0}) = {tr.tau:.12g} is not 1 within {tol}")
    ratio = round(1.0 / (n * step))
    if abs(ratio * n * step - 1.0) > 1e-9:
        raise ValueError("planar step must divide the delay grid step")
    planar = integrate_planar(f, u0, 4.0, step, drift_tol=None)
    u_grid = planar.u[::ratio]
    v_grid = planar.v[::ratio]
    x = np.concatenate((v_grid[: n + 1], u_grid[1:]))
    return _make_trace(n, x), planar


def _ky_checks(f: FeedbackFn, trace: SolutionTrace, planar: PlanarTrace, n: int):
    """Symmetry, delay-equation residual and an independent DDE replay error."""
    x = trace.samples
    # t in [1, 4]: x(t) + x(t - 2)
    sym = float(np.max(np.abs(x[2 * n:] + x[: x.size - 2 * n])))
    # x'(t) = f(v(t)) from the planar field against f(x(t-1)) read off the trace, t in [1, 4]
    ratio = round(1.0 / (n * planar.step))
    v_grid = planar.v[::ratio]
    deriv = f(v_grid[n:])
    delayed = x[n: n + deriv.size]
    res = float(np.max(np.abs(deriv - f(delayed))))
    # independent route: method-of-steps continuation of the first segment
    seg = Segment(n, x[: n + 1])
    replay = integrate(f, seg, 4.0)
    replay_err = float(np.max(np.abs(replay.samples[: x.size] - x)))
    return sym, res, replay_err


@dataclass(frozen=True)
class TauLimitReport:
    limit: float
    probes: tuple[tuple[float, float], ...]
    small_ok: bool
    deviations_decreasing: bool
    tau_x_max: float
    tau_far: float
    growth_ok: bool

    @property
    def passed(self) -> bool:
        return self.small_ok and self.deviations_decreasing and self.growth_ok


def verify_tau_limits(f: FeedbackFn, rel: float = 0.01) -> TauLimitReport:
    """tau near 0 against -(pi/2)/f'(0), and growth of tau at large amplitude.

    Uses amplitudes {1e-3, 1e-4, 1e-5} times the first-piece width and
    compares tau(10*X_max) with tau(X_max).
    """
    limit = -0.5 * math.pi / f.slope0
    w = f.first_piece_width()
    probes = tuple((s * w, tau(f, s * w).tau) for s in (1e-3, 1e-4, 1e-5))
    devs = [abs(t - limit) for _, t in probes]
    small_ok = all(d < rel * limit for d in devs)
    decreasing = all(d1 <= d0 + 1e-9 for d0, d1 in zip(devs, devs[1:]))
    t_x = tau(f, f.x_max).tau
    t_far = tau(f, 10 * f.x_max).tau
    return TauLimitReport(limit, probes, small_ok, decreasing, t_x, t_far, t_far > t_x)


# -- phase plane -------------------------------------------------------------

def phase_plane(trace: SolutionTrace, t_from: float = 0.0, t_to: float | None = None) -> np.ndarray:
    """Points (x(t), x(t-1)) for grid times in [t_from, t_to], t_from >= 0."""
    n = trace.n
    i0 = int(round((t_from + 1.0) * n))
    i1 = trace.samples.size - 1 if t_to is None else int(round((t_to + 1.0) * n))
    k = np.arange(max(i0, n), i1 + 1)
    return np.column_stack((trace.samples[k], trace.samples[k - n]))


def polyline_crossings(p: np.ndarray, q: np.ndarray, chunk: int = 512) -> int:
    """Number of proper intersections between the segments of two polylines."""
    a0, a1 = p[:-1], p[1:]
    b0, b1 = q[:-1], q[1:]
    db = b1 - b0
    count = 0
    for s in range(0, a0.shape[0], chunk):
        p0 = a0[s:s + chunk, None, :]
        da = a1[s:s + chunk, None, :] - p0
        denom = da[..., 0] * db[None, :, 1] - da[..., 1] * db[None, :, 0]
        w = b0[None, :, :] - p0
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (w[..., 0] * db[None, :, 1] - w[..., 1] * db[None, :, 0]) / denom
            tb = (w[..., 0] * da[..., 1] - w[..., 1] * da[..., 0]) / denom
        hit = (denom != 0) & (ta >= 0) & (ta < 1) & (tb >= 0) & (tb < 1)
        count += int(np.count_nonzero(hit))
    return count


def level_set_crossings(f: FeedbackFn, points: np.ndarray, level: float) -> int:
    """Sign changes of H - level along a polyline (crossings of a planar orbit)."""
    g = hamiltonian(f, points[:, 0], points[:, 1]) - level
    s = np.sign(g)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))
