"""Method-of-steps integration of x'(t) = f(x(t-1)) on a delay-aligned grid.

The grid step is h = 1/n, so the delay is exactly n steps and every delayed
value the stepper needs is already a grid value. One whole delay interval
is advanced per vectorised update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .feedback import FeedbackFn

__all__ = [
    "Segment", "SolutionTrace", "NumericalError", "integrate", "find_zeros",
    "segment_at", "level_crossings", "value_at", "dense_value",
    "DEFAULT_N", "DEFAULT_HORIZON",
]

DEFAULT_N = 1000
DEFAULT_HORIZON = 200.0
SLOW_OSC_VIOLATION = "SLOW_OSC_VIOLATION"


class NumericalError(RuntimeError):
    """A numerical invariant was violated beyond its error budget."""


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Segment:
    """History function on [-1, 0] sampled at ``-1 + k/n``, k = 0..n."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("grid resolution n must be an integer >= 2")
        vals = _frozen(self.values)
        if vals.shape != (self.n + 1,):
            raise ValueError(f"expected {self.n + 1} samples, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def times(self) -> np.ndarray:
        return -1.0 + np.arange(self.n + 1) / self.n

    def norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def cone_violations(self, bound: float | None = None) -> list[str]:
        """Names of the cone conditions this segment fails (empty if in K)."""
        bad = []
        if self.values[0] != 0.0:
            bad.append("phi(-1) = 0")
        if np.any(np.diff(self.values) < 0):
            bad.append("phi nondecreasing")
        if bound is not None and self.norm() > bound:
            bad.append("||phi|| <= M")
        return bad

    def in_cone(self, bound: float | None = None) -> bool:
        return not self.cone_violations(bound)

    def distance(self, other: "Segment") -> float:
        if other.n != self.n:
            raise ValueError("segments live on different grids")
        return float(np.max(np.abs(self.values - other.values)))

    def __eq__(self, other):
        if not isinstance(other, Segment):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.values, other.values)

    __hash__ = None

    # constructors
    @classmethod
    def zero(cls, n: int = DEFAULT_N) -> "Segment":
        return cls(n, np.zeros(n + 1))

    @classmethod
    def constant(cls, level: float, n: int = DEFAULT_N) -> "Segment":
        return cls(n, np.full(n + 1, float(level)))

    @classmethod
    def ramp(cls, amplitude: float, n: int = DEFAULT_N) -> "Segment":
        """phi(s) = amplitude * (s + 1); exact zero at s = -1."""
        return cls(n, amplitude * (np.arange(n + 1) / n))

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], n: int = DEFAULT_N) -> "Segment":
        s = -1.0 + np.arange(n + 1) / n
        return cls(n, np.broadcast_to(np.asarray(fn(s), dtype=float), s.shape))

    def scaled(self, factor: float) -> "Segment":
        return Segment(self.n, factor * self.values)


@dataclass(frozen=True, eq=False)
class SolutionTrace:
    """Solution samples x(-1 + k/n), k = 0..N, with refined zeros in t > 0."""

    n: int
    samples: np.ndarray
    zeros: np.ndarray
    directions: np.ndarray
    diagnostics: tuple[str, ...] = ()

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def times(self) -> np.ndarray:
        return -1.0 + np.arange(self.samples.size) / self.n

    @property
    def t_end(self) -> float:
        return -1.0 + (self.samples.size - 1) / self.n

    @property
    def zero_count(self) -> int:
        return int(self.zeros.size)

    J = zero_count

    def gaps(self) -> np.ndarray:
        return np.diff(self.zeros)


# -- stepping ---------------------------------------------------------------

def _advance(f: FeedbackFn, delayed: np.ndarray, x_start: float, h: float, exact: bool) -> np.ndarray:
    """Values at the next len(delayed)-1 grid nodes given the delayed samples."""
    if exact:
        incr = h * f.mean_along(delayed[:-1], delayed[1:])
    else:
        fd = f(delayed)
        incr = 0.5 * h * (fd[:-1] + fd[1:])
    return x_start + np.cumsum(incr)


def integrate(f: FeedbackFn, phi: Segment, T: float = DEFAULT_HORIZON, *,
              stop_after_zeros: int | None = None, quadrature: str = "exact") -> SolutionTrace:
    """Continue ``phi`` as a solution on [-1, T].

    Each step is x[k+1] = x[k] + integral of f(x(s-1)) over one cell, with the
    delayed solution taken as the linear interpolant of its samples. With
    ``quadrature="exact"`` the cell integral is evaluated exactly (the
    trapezoid rule, except in cells where the delayed path crosses a kink of
    f); ``"trapezoid"`` always uses the plain trapezoid rule.

    If ``stop_after_zeros`` is given, integration stops one delay after the
    requested number of positive zeros has been seen (or at ``T``).
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if quadrature not in ("exact", "trapezoid"):
        raise ValueError(f"unknown quadrature {quadrature!r}")
    exact = quadrature == "exact"
    n = phi.n
    h = 1.0 / n
    steps = int(math.ceil(T * n - 1e-9))
    x = np.empty(n + 1 + steps)
    x[: n + 1] = phi.values
    k = n  # index of last computed node
    stop_at = None
    while k < n + steps:
        m = min(n, n + steps - k)
        x[k + 1 : k + 1 + m] = _advance(f, x[k - n : k - n + m + 1], x[k], h, exact)
        k += m
        if stop_after_zeros is not None and stop_at is None:
            z, _ = _raw_zeros(x[: k + 1], n)
            if z.size >= stop_after_zeros:
                stop_at = int(math.ceil((z[stop_after_zeros - 1] + 2.0) * n)) + 2
        if stop_at is not None and k >= stop_at:
            break
    x = x[: k + 1]
    return _make_trace(n, x)


def _make_trace(n: int, x: np.ndarray) -> SolutionTrace:
    z, d = _raw_zeros(x, n)
    diags = []
    if z.size > 1 and np.any(np.diff(z) <= 1.0 - 1.0 / n):
        diags.append(SLOW_OSC_VIOLATION)
    x.flags.writeable = False
    return SolutionTrace(n, x, _frozen(z), np.array(d, dtype=int), tuple(diags))


def _raw_zeros(x: np.ndarray, n: int, level: float = 0.0, start: int | None = None):
    """Sign changes of x - level on nodes k >= start, refined linearly."""
    if start is None:
        start = n
    y = x[start:] - level
    s = np.sign(y)
    nz = np.flatnonzero(s)
    if nz.size < 2:
        return np.empty(0), np.empty(0, dtype=int)
    flip = s[nz[:-1]] * s[nz[1:]] < 0
    i = nz[:-1][flip]
    j = nz[1:][flip]
    adjacent = j == i + 1
    yi = y[i]
    yj = y[j]
    frac = np.where(adjacent, yi / np.where(adjacent, yi - yj, 1.0), 0.0)
    pos = np.where(adjacent, i + frac, 0.5 * (i + j))
    t = -1.0 + (start + pos) / n
    return t, np.sign(yj).astype(int)


def find_zeros(trace: SolutionTrace) -> tuple[np.ndarray, np.ndarray, bool]:
    """Return ``(zeros, directions, slow_ok)`` for the positive zeros of a trace.

    ``slow_ok`` is False when two refined zeros are within 1 - h of each other.
    """
    ok = SLOW_OSC_VIOLATION not in trace.diagnostics
    return trace.zeros, trace.directions, ok


def level_crossings(trace: SolutionTrace, level: float, after: float = 0.0,
                    direction: int | None = None) -> np.ndarray:
    """Times t > ``after`` where x crosses ``level`` (linear refinement)."""
    start = max(0, int(math.floor((after + 1.0) * trace.n)))
    t, d = _raw_zeros(trace.samples, trace.n, level=level, start=start)
    keep = t > after
    if direction is not None:
        keep &= d == direction
    return t[keep]


def _index_position(trace: SolutionTrace, t):
    pos = (np.asarray(t, dtype=float) + 1.0) * trace.n
    near = np.rint(pos)
    pos = np.where(np.abs(pos - near) < 1e-9, near, pos)
    return pos


def value_at(trace: SolutionTrace, t):
    """Linear interpolation of the trace at times ``t``."""
    pos = _index_position(trace, t)
    last = trace.samples.size - 1
    if np.any(pos < 0) or np.any(pos > last):
        raise ValueError("time outside the trace")
    j = np.minimum(np.floor(pos).astype(int), last - 1)
    frac = pos - j
    xs = trace.samples
    return xs[j] + frac * (xs[j + 1] - xs[j])


def dense_value(f: FeedbackFn, trace: SolutionTrace, t: float) -> float:
    """Method-of-steps value x(t) = x(t_k) + int_{t_k}^t f(x(s-1)) ds, t >= 0.

    The delayed solution is the linear interpolant of the trace, and the
    integral over the partial cell is exact for piecewise-linear f.
    """
    if t < 0:
        return float(value_at(trace, t))
    pos = float(_index_position(trace, t))
    k = int(math.floor(pos))
    if k >= trace.samples.size - 1:
        return float(trace.samples[-1]) if pos == trace.samples.size - 1 else float(value_at(trace, t))
    theta = pos - k
    if theta == 0.0:
        return float(trace.samples[k])
    xa = trace.samples[k - trace.n]
    xb = xa + theta * (trace.samples[k - trace.n + 1] - xa)
    mean = f.mean_along(np.array([xa]), np.array([xb]))[0]
    return float(trace.samples[k] + theta * trace.h * mean)


def segment_at(trace: SolutionTrace, t: float, *, normalize: bool = False,
               bound: float | None = None) -> Segment:
    """The segment x_t on [-1, 0], sampled on the trace grid.

    With ``normalize=True`` the result is pushed back into the cone: the left
    value is snapped to 0 when within ``10*h*bound`` and small monotonicity
    defects (same budget) are removed by a running maximum.
    """
    if t < 0 or t > trace.t_end + 1e-12:
        raise ValueError(f"t = {t} outside [0, {trace.t_end}]")
    n = trace.n
    vals = value_at(trace, t - 1.0 + np.arange(n + 1) / n)
    if normalize:
        if bound is None:
            raise ValueError("normalisation needs the feedback bound")
        budget = 10.0 * trace.h * bound
        if abs(vals[0]) < budget:
            vals[0] = 0.0
        else:
            raise NumericalError(f"segment left value {vals[0]:.3g} not near 0")
        drop = np.maximum.accumulate(vals) - vals
        if np.max(drop) > budget:
            raise NumericalError(f"monotonicity defect {np.max(drop):.3g} exceeds budget")
        vals = np.maximum.accumulate(vals)
    return Segment(n, vals)
