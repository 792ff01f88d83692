"""A period-4 solution and the long-period solution for the same feedback.

The period-4 solution comes from the planar system u' = f(v), v' = -f(u):
find u0 with tau(u0) = 1 (a quarter turn in unit time), then lift the
planar orbit to x(t). Both solutions are written as time series and as
curves in the (x(t), x(t-1)) plane.

    python demos/period_four_vs_long_period.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from slowosc import io
from slowosc.scenarios import scenario_ky_coexistence
from slowosc.kaplan_yorke import tau

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out/period_four")
out.mkdir(parents=True, exist_ok=True)

rep = scenario_ky_coexistence(out_dir=out)
print(rep.to_text())

f = rep.values["f"]
us = np.linspace(1.9, 3.0, 45)
taus = np.array([tau(f, u).tau for u in us])
io.emit_csv(out / "tau.csv", io.TAU_HEADER, np.column_stack((us, taus)))
io.emit_svg_polyline(out / "tau.svg", [("tau(u0)", us, taus), ("1", us, np.ones_like(us))],
                     "u0", "quarter-turn time")
print("wrote", out)
