"""Piecewise-linear odd feedback functions for x'(t) = f(x(t-1)).

A :class:`FeedbackFn` is stored by its breakpoints on ``[0, X_max]`` plus a
constant tail; values for negative arguments come from the odd extension.
Constructors cover the long-period family (parameters ``a, c, delta, gamma``),
its multi-scale stacking, and the plateau family used for the two-solution
example with a stable equilibrium.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "FeedbackFn", "HppParams", "HprimeParams", "ConditionCheck",
    "ValidationReport", "Stability", "FeedbackConstructionError",
    "validate_params", "build_hpp_feedback", "build_multiscale",
    "build_plateau_feedback", "multiscale_params", "integral_abs",
    "check_condition2", "check_hprime", "stability_class", "dumps", "loads",
]

BOUNDARY_TOL = 1e-12


class FeedbackConstructionError(ValueError):
    """Raised when a requested feedback function violates a construction bound."""


class FeedbackFn:
    """Odd, continuous, piecewise-linear feedback function.

    Parameters
    ----------
    xs, ys : sequence of float
        Breakpoints on ``[0, X_max]``. ``xs[0]`` must be 0 with ``ys[0] = 0``,
        ``xs`` strictly increasing, every ``ys[k] < 0`` for ``k > 0``.
    tail_value : float
        Constant value of ``f`` for ``x >= X_max``. Must equal ``ys[-1]``.
    """

    def __init__(self, xs: Sequence[float], ys: Sequence[float], tail_value: float):
        xs = np.array(xs, dtype=float)
        ys = np.array(ys, dtype=float)
        tail_value = float(tail_value)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise FeedbackConstructionError("need at least two breakpoints of matching shape")
        if xs[0] != 0.0 or ys[0] != 0.0:
            raise FeedbackConstructionError("first breakpoint must be (0, 0)")
        if np.any(np.diff(xs) <= 0):
            raise FeedbackConstructionError("breakpoint abscissae must be strictly increasing")
        if np.any(ys[1:] >= 0) or tail_value >= 0:
            raise FeedbackConstructionError("negative feedback requires f(x) < 0 for x > 0")
        if tail_value != ys[-1]:
            raise FeedbackConstructionError("tail value must continue the last breakpoint")
        xs.flags.writeable = False
        ys.flags.writeable = False
        self.xs = xs
        self.ys = ys
        self.tail_value = tail_value
        self._xl = xs.tolist()
        self._yl = ys.tolist()
        # cumulative integral of f over [0, xs[k]]
        prim = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(xs) * (ys[1:] + ys[:-1]))))
        prim.flags.writeable = False
        self._prim = prim
        self._priml = prim.tolist()
        knots = np.concatenate((-xs[:0:-1], xs[1:]))
        knots.flags.writeable = False
        self.kinks = knots

    # -- basic data -------------------------------------------------------
    @property
    def x_max(self) -> float:
        return self._xl[-1]

    @property
    def slope0(self) -> float:
        """Slope of the first linear piece, i.e. f'(0)."""
        return self._yl[1] / self._xl[1]

    @property
    def bound(self) -> float:
        """Global bound M = sup |f|."""
        return float(np.max(np.abs(self.ys)))

    @property
    def breakpoints(self) -> list[tuple[float, float]]:
        return list(zip(self._xl, self._yl))

    def __repr__(self) -> str:
        return f"FeedbackFn(breakpoints={self.breakpoints}, tail_value={self.tail_value})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeedbackFn):
            return NotImplemented
        return (self._xl == other._xl and self._yl == other._yl
                and self.tail_value == other.tail_value)

    def __hash__(self):
        return hash((tuple(self._xl), tuple(self._yl), self.tail_value))

    # -- evaluation -------------------------------------------------------
    def __call__(self, x):
        """Evaluate f, vectorised over numpy arrays."""
        x = np.asarray(x, dtype=float)
        mag = np.interp(np.abs(x), self.xs, self.ys, right=self.tail_value)
        return np.where(x < 0, -mag, mag)

    def scalar(self, x: float) -> float:
        """Fast scalar evaluation, identical formula to :meth:`__call__`."""
        ax = -x if x < 0 else x
        xl = self._xl
        if ax >= xl[-1]:
            val = self.tail_value
        else:
            k = bisect.bisect_right(xl, ax) - 1
            x0 = xl[k]
            y0 = self._yl[k]
            val = y0 + (ax - x0) * (self._yl[k + 1] - y0) / (xl[k + 1] - x0)
        return -val if x < 0 else val

    def primitive(self, x):
        """Exact antiderivative G(x) = integral of f over [0, x]; even in x."""
        ax = np.abs(np.asarray(x, dtype=float))
        k = np.clip(np.searchsorted(self.xs, ax, side="right") - 1, 0, self.xs.size - 1)
        xk = self.xs[k]
        yk = self.ys[k]
        fx = np.interp(ax, self.xs, self.ys, right=self.tail_value)
        return self._prim[k] + 0.5 * (ax - xk) * (yk + fx)

    def mean_along(self, xa, xb):
        """Exact mean of f over the straight path from ``xa`` to ``xb``.

        Equals ``(G(xb) - G(xa)) / (xb - xa)``; where no kink lies between
        the endpoints this reduces to the trapezoid value, which is used
        directly to avoid cancellation.
        """
        xa = np.asarray(xa, dtype=float)
        xb = np.asarray(xb, dtype=float)
        fa = self(xa)
        fb = self(xb)
        out = 0.5 * (fa + fb)
        ia = np.searchsorted(self.kinks, xa)
        ib = np.searchsorted(self.kinks, xb)
        cross = ia != ib
        if np.any(cross):
            xa_c, xb_c = xa[cross], xb[cross]
            fa_c, fb_c = fa[cross], fb[cross]
            dx = xb_c - xa_c
            quotient = (self.primitive(xb_c) - self.primitive(xa_c)) / np.where(dx == 0, 1.0, dx)
            # single kink crossed over a tiny step: split the path exactly at the kink
            lo = np.minimum(ia[cross], ib[cross])
            kink = self.kinks[np.clip(lo, 0, self.kinks.size - 1)]
            theta = np.where(dx == 0, 0.5, (kink - xa_c) / np.where(dx == 0, 1.0, dx))
            fk = self(kink)
            split = 0.5 * (theta * (fa_c + fk) + (1.0 - theta) * (fk + fb_c))
            single = np.abs(ia[cross] - ib[cross]) == 1
            out[cross] = np.where(single & (np.abs(dx) < 1e-6), split, quotient)
        return out

    def scalar_primitive(self, x: float) -> float:
        ax = -x if x < 0 else x
        xl = self._xl
        if ax >= xl[-1]:
            return self._priml[-1] + (ax - xl[-1]) * self.tail_value
        k = bisect.bisect_right(xl, ax) - 1
        return self._priml[k] + 0.5 * (ax - xl[k]) * (self._yl[k] + self.scalar(ax))

    def first_piece_width(self) -> float:
        return self._xl[1]

    def is_constant_beyond(self, x0: float) -> bool:
        """True when f equals its tail value on all of ``[x0, inf)``."""
        idx = self.xs >= x0
        if x0 < self.x_max and not np.all(self.ys[idx] == self.tail_value):
            return False
        return self.scalar(x0) == self.tail_value


# -- parameter families ----------------------------------------------------

@dataclass(frozen=True)
class HppParams:
    """Long-period family parameters (a, c, delta, gamma)."""
    a: float
    c: float
    delta: float
    gamma: float

    def __post_init__(self):
        for name in ("a", "c", "delta", "gamma"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ValueError(f"parameter {name} must be positive, got {val!r}")


@dataclass(frozen=True)
class HprimeParams:
    """Bound ``mu`` on |f| and the plateau pair: |f(x)| >= sigma for |x| >= beta."""
    mu: float
    beta: float
    sigma: float

    def __post_init__(self):
        for name in ("mu", "beta", "sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"parameter {name} must be positive")

    @property
    def two_sop_bound(self) -> float:
        return self.sigma / (2.0 + self.mu / self.sigma)

    def admits_two_sops(self) -> bool:
        return self.beta < self.two_sop_bound


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    passed: bool
    margin: float


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[ConditionCheck, ...]

    @property
    def valid(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> ConditionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def validate_params(p: HppParams) -> ValidationReport:
    """Check conditions (i)-(iii) and report the slack of each.

    (i)   c < min(a, delta)
    (ii)  gamma >= 4a and gamma > delta
    (iii) delta + (c/delta)*gamma <= a
    """
    m1 = min(p.a, p.delta) - p.c
    m2 = min(p.gamma - 4 * p.a, p.gamma - p.delta)
    ok2 = p.gamma - 4 * p.a >= 0 and p.gamma - p.delta > 0
    m3 = p.a - (p.delta + p.c / p.delta * p.gamma)
    return ValidationReport((
        ConditionCheck("i", m1 > 0, m1),
        ConditionCheck("ii", ok2, m2),
        ConditionCheck("iii", m3 >= 0, m3),
    ))


def _require_valid(p: HppParams) -> None:
    report = validate_params(p)
    if not report.valid:
        raise FeedbackConstructionError(
            "parameter conditions violated: " + ", ".join(
                f"({c.name}) margin {c.margin:.6g}" for c in report.checks if not c.passed))


def build_hpp_feedback(p: HppParams, slope0: float) -> FeedbackFn:
    """Feedback with f = -gamma on [a, 2a-c] and f = -delta on [2a, inf).

    The pieces are: ``slope0*x`` on [0, a-c], linear up to (a, -gamma),
    constant on [a, 2a-c], linear to (2a, -delta), constant tail after.
    """
    _require_valid(p)
    if not slope0 < 0:
        raise FeedbackConstructionError("slope0 must be negative")
    a, c, d, g = p.a, p.c, p.delta, p.gamma
    if -slope0 * (a - c) > g * (1 + BOUNDARY_TOL):
        raise FeedbackConstructionError(
            f"|slope0|*(a-c) = {-slope0 * (a - c):.6g} exceeds gamma = {g:.6g}")
    xs = [0.0, a - c, a, 2 * a - c, 2 * a]
    ys = [0.0, slope0 * (a - c), -g, -g, -d]
    return FeedbackFn(xs, ys, -d)


def multiscale_params(gammas: Sequence[float]) -> list[HppParams]:
    """Per-scale parameters a = g/4, delta = g/8, c = g/64."""
    gammas = [float(g) for g in gammas]
    if not gammas:
        raise FeedbackConstructionError("need at least one scale")
    for g in gammas:
        if not g > 0:
            raise FeedbackConstructionError("scales must be positive")
    for g0, g1 in zip(gammas, gammas[1:]):
        if not g1 < g0 / 4:
            raise FeedbackConstructionError(
                f"scale ratio violated: {g1:.6g} >= {g0:.6g}/4")
    return [HppParams(a=g / 4, c=g / 64, delta=g / 8, gamma=g) for g in gammas]


def build_multiscale(gammas: Sequence[float], slope0: float | None = None) -> FeedbackFn:
    """Stack the long-period construction at several nested scales.

    ``gammas`` is ordered outermost first and must satisfy
    ``gammas[n+1] < gammas[n]/4``. Between scales, f is linear from
    ``(gamma_{n+1}, -delta_{n+1})`` to ``(a_n, -gamma_n)``.
    """
    params = multiscale_params(gammas)
    inner = params[-1]
    width = inner.a - inner.c
    if slope0 is None:
        slope0 = -inner.gamma / width
    if not slope0 < 0:
        raise FeedbackConstructionError("slope0 must be negative")
    if -slope0 * width > inner.gamma * (1 + BOUNDARY_TOL):
        raise FeedbackConstructionError(
            f"|slope0|*(a-c) = {-slope0 * width:.6g} exceeds innermost gamma {inner.gamma:.6g}")
    xs = [0.0, width]
    ys = [0.0, slope0 * width]
    for k, p in enumerate(reversed(params)):
        if k > 0:
            prev = params[len(params) - k]
            xs.append(prev.gamma)
            ys.append(-prev.delta)
        xs += [p.a, 2 * p.a - p.c, 2 * p.a]
        ys += [-p.gamma, -p.gamma, -p.delta]
    return FeedbackFn(xs, ys, ys[-1])


def build_plateau_feedback(hp: HprimeParams, slope0: float) -> FeedbackFn:
    """``slope0*x`` on [0, beta/2], linear to (beta, -sigma), constant after."""
    if not slope0 < 0:
        raise FeedbackConstructionError("slope0 must be negative")
    if hp.sigma > hp.mu:
        raise FeedbackConstructionError("sigma cannot exceed the bound mu")
    half = hp.beta / 2
    if -slope0 * half > hp.sigma:
        raise FeedbackConstructionError("first piece overshoots the plateau value")
    return FeedbackFn([0.0, half, hp.beta], [0.0, slope0 * half, -hp.sigma], -hp.sigma)


# -- exact integrals and hypothesis checks ---------------------------------

def integral_abs(f: FeedbackFn, x0: float, x1: float) -> float:
    """Exact integral of |f| over [x0, x1] with 0 <= x0 <= x1."""
    if x0 < 0 or x1 < x0:
        raise ValueError("need 0 <= x0 <= x1")
    return -(f.scalar_primitive(x1) - f.scalar_primitive(x0))


def check_condition2(f: FeedbackFn, p: HppParams) -> tuple[bool, float, float]:
    """Return ``(holds, lhs, rhs)`` for (1/gamma) * int_0^a |f| < a - c."""
    lhs = integral_abs(f, 0.0, p.a) / p.gamma
    rhs = p.a - p.c
    return lhs < rhs, lhs, rhs


def check_hprime(f: FeedbackFn, hp: HprimeParams) -> bool:
    """|f| <= mu everywhere and |f| >= sigma on |x| >= beta.

    Exact for piecewise-linear f: extrema of |f| on each piece sit at its ends.
    """
    if f.bound > hp.mu:
        return False
    pts = [hp.beta] + [x for x in f.xs.tolist() if x > hp.beta]
    lowest = min(abs(f.scalar(x)) for x in pts)
    return min(lowest, abs(f.tail_value)) >= hp.sigma


class Stability(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    BOUNDARY = "boundary"


def stability_class(slope0: float) -> Stability:
    """Linearised stability of x = 0 from f'(0); threshold -pi/2."""
    if not slope0 < 0:
        raise ValueError("f'(0) must be negative")
    if abs(slope0 + math.pi / 2) <= BOUNDARY_TOL:
        return Stability.BOUNDARY
    return Stability.STABLE if slope0 > -math.pi / 2 else Stability.UNSTABLE


# -- text format -------------------------------------------------------------

HEADER = "# feedback v1"


def dumps(f: FeedbackFn) -> str:
    lines = [HEADER]
    lines += [f"{x:.17g} {y:.17g}" for x, y in f.breakpoints]
    lines.append(f"tail {f.tail_value:.17g}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> FeedbackFn:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != HEADER:
        raise ValueError("missing '# feedback v1' header")
    xs, ys, tail = [], [], None
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "tail":
            if len(parts) != 2:
                raise ValueError(f"malformed tail line: {ln!r}")
            tail = float(parts[1])
        elif len(parts) == 2:
            xs.append(float(parts[0]))
            ys.append(float(parts[1]))
        else:
            raise ValueError(f"malformed breakpoint line: {ln!r}")
    if tail is None:
        raise ValueError("missing tail line")
    return FeedbackFn(xs, ys, tail)
