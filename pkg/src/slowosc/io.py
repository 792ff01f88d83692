"""Plain-text file formats: CSV tables, SVG polylines, segment and SOP records.

Every numeric field is written with ``%.17g`` and LF line endings so that
identical inputs give identical bytes.
"""

from __future__ import annotations

import math
import os
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dde import Segment, SolutionTrace
from .feedback import FeedbackFn, dumps, loads

__all__ = [
    "TRACE_HEADER", "ZEROS_HEADER", "PHASE_HEADER", "TAU_HEADER", "PLANAR_HEADER",
    "emit_csv", "read_csv", "trace_rows", "zeros_rows", "phase_rows", "planar_rows",
    "emit_svg_polyline", "write_segment", "read_segment", "write_feedback",
    "read_feedback", "write_sop_record", "read_record", "write_config", "OUTPUT_ENV",
    "default_output_dir",
]

TRACE_HEADER = ("t", "x")
ZEROS_HEADER = ("j", "z", "direction")
PHASE_HEADER = ("t", "x", "x_delayed")
TAU_HEADER = ("u0", "tau")
PLANAR_HEADER = ("t", "u", "v", "H")

OUTPUT_ENV = "SLOWOSC_OUTPUT_DIR"


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "slowosc_out"))


def _fmt(v) -> str:
    return "%.17g" % v


def emit_csv(path, header: Sequence[str], rows) -> Path:
    """Write ``header`` then one ``%.17g`` line per row."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, len(header))
    if rows.shape[1] != len(header):
        raise ValueError(f"rows have {rows.shape[1]} columns, header has {len(header)}")
    path = Path(path)
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    path.write_bytes(("\n".join(lines) + "\n").encode("ascii"))
    return path


def read_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    text = Path(path).read_text().splitlines()
    header = tuple(text[0].split(","))
    if len(text) == 1:
        return header, np.empty((0, len(header)))
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    return header, data


def trace_rows(trace: SolutionTrace) -> np.ndarray:
    return np.column_stack((trace.times, trace.samples))


def zeros_rows(trace: SolutionTrace) -> np.ndarray:
    j = np.arange(1, trace.zero_count + 1)
    return np.column_stack((j, trace.zeros, trace.directions))


def phase_rows(trace: SolutionTrace, t_from: float = 0.0, t_to: float | None = None) -> np.ndarray:
    """Rows (t, x(t), x(t-1)); the delayed value is the sample n nodes back."""
    n = trace.n
    i0 = max(n, int(round((t_from + 1.0) * n)))
    i1 = trace.samples.size - 1 if t_to is None else int(round((t_to + 1.0) * n))
    k = np.arange(i0, i1 + 1)
    return np.column_stack((trace.times[k], trace.samples[k], trace.samples[k - n]))


def planar_rows(f: FeedbackFn, planar) -> np.ndarray:
    from .kaplan_yorke import hamiltonian
    return np.column_stack((planar.t, planar.u, planar.v, hamiltonian(f, planar.u, planar.v)))


# -- SVG ----------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / count
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10)), key=lambda s: abs(s - raw))
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * span:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def emit_svg_polyline(path, series: Sequence[tuple[str, np.ndarray, np.ndarray]],
                      xlabel: str = "", ylabel: str = "", title: str = "",
                      width: int = 640, height: int = 420, max_points: int = 4000) -> Path:
    """Standalone SVG with one polyline per ``(label, xs, ys)`` series.

    Axes are linear, auto-scaled with a 5% margin, and carry tick labels.
    Long series are decimated by a fixed stride (deterministic).
    """
    if not series:
        raise ValueError("nothing to plot: empty series list")
    cleaned = []
    for label, xs, ys in series:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.shape != ys.shape or xs.size == 0:
            raise ValueError(f"series {label!r} is empty or ragged")
        stride = max(1, int(math.ceil(xs.size / max_points)))
        idx = np.arange(0, xs.size, stride)
        if idx[-1] != xs.size - 1:
            idx = np.append(idx, xs.size - 1)
        cleaned.append((label, xs[idx], ys[idx]))
    allx = np.concatenate([c[1] for c in cleaned])
    ally = np.concatenate([c[2] for c in cleaned])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    mx, my = 0.05 * (x1 - x0), 0.05 * (y1 - y0)
    x0, x1, y0, y1 = x0 - mx, x1 + mx, y0 - my, y1 + my

    left, right, top, bottom = 60, 20, 30, 45
    pw, ph = width - left - right, height - top - bottom

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="18" text-anchor="middle">{_esc(title)}</text>')
    for v in _ticks(x0, x1):
        px = sx(v)
        out.append(f'<line x1="{px:.2f}" y1="{top + ph}" x2="{px:.2f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{top + ph + 16}" text-anchor="middle">{v:g}</text>')
    for v in _ticks(y0, y1):
        py = sy(v)
        out.append(f'<line x1="{left - 4}" y1="{py:.2f}" x2="{left}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{py + 4:.2f}" text-anchor="end">{v:g}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{_esc(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {top + ph / 2:.1f})">{_esc(ylabel)}</text>')
    for i, (label, xs, ys) in enumerate(cleaned):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{pts}"/>')
        out.append(f'<text x="{left + 8}" y="{top + 14 + 13 * i}" fill="{color}">{_esc(label)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_bytes(("\n".join(out) + "\n").encode("utf-8"))
    return path


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


# -- segments, feedback functions, SOP records ------------------------------

def write_segment(path, seg: Segment) -> Path:
    lines = ["# segment v1", f"n {seg.n}"] + [_fmt(v) for v in seg.values]
    path = Path(path)
    path.write_bytes(("\n".join(lines) + "\n").encode("ascii"))
    return path


def read_segment(path) -> Segment:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0] != "# segment v1":
        raise ValueError(f"{path}: not a segment file")
    key, val = lines[1].split()
    if key != "n":
        raise ValueError(f"{path}: expected 'n <int>' on line 2")
    return Segment(int(val), np.array([float(v) for v in lines[2:]]))


def write_feedback(path, f: FeedbackFn) -> Path:
    path = Path(path)
    path.write_bytes(dumps(f).encode("ascii"))
    return path


def read_feedback(path) -> FeedbackFn:
    return loads(Path(path).read_text())


def write_sop_record(directory, sop, prefix: str = "sop") -> list[Path]:
    """``<prefix>.txt`` (key: value), ``<prefix>_segment.txt`` and ``<prefix>_trace.csv``."""
    directory = Path(directory)
    rec = directory / f"{prefix}.txt"
    fields = [("period", sop.period), ("amplitude", sop.amplitude),
              ("residual", sop.residual), ("iterations", sop.iterations),
              ("n", sop.fixed_segment.n)]
    rec.write_bytes("".join(f"{k}: {v if isinstance(v, int) else _fmt(v)}\n"
                            for k, v in fields).encode("ascii"))
    seg = write_segment(directory / f"{prefix}_segment.txt", sop.fixed_segment)
    n = sop.fixed_segment.n
    k_end = min(sop.trace.samples.size - 1, int(math.ceil(sop.period * n)) + n)
    rows = trace_rows(sop.trace)[: k_end + 1]
    csv = emit_csv(directory / f"{prefix}_trace.csv", TRACE_HEADER, rows)
    return [rec, seg, csv]


def read_record(path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            k, v = line.split(":", 1)
            out[k.strip()] = v.strip()
    return out


def write_config(directory, config: Mapping[str, object] | Iterable[tuple[str, object]]) -> Path:
    """Echo the effective configuration as ``key = value`` lines."""
    items = config.items() if isinstance(config, Mapping) else config
    lines = []
    for k, v in items:
        if isinstance(v, float):
            v = _fmt(v)
        elif isinstance(v, (list, tuple)):
            v = ",".join(_fmt(x) if isinstance(x, float) else str(x) for x in v)
        lines.append(f"{k} = {v}")
    path = Path(directory) / "config.txt"
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    return path
