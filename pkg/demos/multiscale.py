"""One stable periodic orbit per scale of a nested feedback.

    python demos/multiscale.py [gamma1,gamma2,...] [out_dir]
"""

import sys
from pathlib import Path

from slowosc.scenarios import scenario_multiscale

gammas = [float(g) for g in (sys.argv[1] if len(sys.argv) > 1 else "64,8,1").split(",")]
out = Path(sys.argv[2] if len(sys.argv) > 2 else "demo_out/multiscale")
out.mkdir(parents=True, exist_ok=True)

rep = scenario_multiscale(gammas, out_dir=out)
print(rep.to_text())
