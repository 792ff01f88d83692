"""Stable zero solution next to a stable periodic orbit.

With f'(0) = -1 small histories decay while large ones settle on a
periodic orbit. Bisecting a one-parameter family of ramps locates the
boundary between the two basins; the orbit started on that boundary
lingers near an unstable periodic orbit before choosing a side, and edge
tracking keeps it there for longer.

    python demos/two_attractors.py [plateau|hpp] [out_dir]
"""

import sys
from pathlib import Path

from slowosc.scenarios import scenario_two_sops_stable_zero

variant = sys.argv[1] if len(sys.argv) > 1 else "plateau"
out = Path(sys.argv[2] if len(sys.argv) > 2 else f"demo_out/two_attractors_{variant}")
out.mkdir(parents=True, exist_ok=True)

rep = scenario_two_sops_stable_zero(variant, out_dir=out)
print(rep.to_text())
w, et = rep.values["witness"], rep.values["edge"]
print(f"s* = {w.s_star:.17g}, single-orbit persistence {w.persistence:.2f}, "
      f"edge-tracked persistence {et.persistence:.2f}")
