"""Model lines of the reshaped logical state versus theta0.

Bit-flip rates are multiples of a per-gate infidelity (default 0.014), the
mapping used for hardware comparisons.  Writes CSV to stdout.
"""
import argparse
import math

import numpy as np

from msreshape.repcode import model_curves

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--infidelity", type=float, default=0.014)
ap.add_argument("--multiples", default="0,1,2,4,8")
ap.add_argument("--points", type=int, default=41)
ap.add_argument("--phi", type=float, default=math.pi / 9)
args = ap.parse_args()

ps = [args.infidelity * int(m) for m in args.multiples.split(",")]
thetas = np.linspace(0, math.pi, args.points)
print("p,theta0,rho00,re_rho01,im_rho01")
for row in model_curves(ps, thetas, args.phi):
    print(",".join(f"{v:.8g}" for v in row))
