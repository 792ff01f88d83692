"""Long-period slowly oscillating solution of x'(t) = f(x(t-1)).

Builds the plateau feedback with a = 1, c = 1/20, delta = 2/3, gamma = 4,
runs the return map from the ramp 3*(s+1), and writes the time series,
zeros, phase plane and an SVG plot.

    python demos/long_period_sop.py [out_dir]
"""

import sys
from pathlib import Path

from slowosc import io
from slowosc.dde import Segment
from slowosc.feedback import HppParams, build_hpp_feedback, validate_params
from slowosc.return_map import iterate_to_fixed_point

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/long_period")
out.mkdir(parents=True, exist_ok=True)

p = HppParams(a=1.0, c=0.05, delta=2 / 3, gamma=4.0)
print(validate_params(p))
f = build_hpp_feedback(p, slope0=-2.0)

sop = iterate_to_fixed_point(f, Segment.ramp(3.0))
print(f"period {sop.period:.9f}, amplitude {sop.amplitude:.9f}, "
      f"{sop.iterations} iterations, residual {sop.residual:.2e}")
print("zeros:", ", ".join(f"{z:.6f}" for z in sop.trace.zeros))

io.write_sop_record(out, sop)
io.emit_csv(out / "zeros.csv", io.ZEROS_HEADER, io.zeros_rows(sop.trace))
ph = io.phase_rows(sop.trace)
io.emit_csv(out / "phase.csv", io.PHASE_HEADER, ph)
io.emit_svg_polyline(out / "sop.svg", [("x(t)", sop.trace.times, sop.trace.samples)],
                     "t", "x(t)", "period > 4")
io.emit_svg_polyline(out / "phase.svg", [("(x(t), x(t-1))", ph[:, 1], ph[:, 2])],
                     "x(t)", "x(t-1)")
print("wrote", out)
