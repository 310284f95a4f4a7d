"""Kraus coefficients of the MS gate versus motional dephasing rate.

Prints the analytic coefficients and, with --exact, those fitted to the
integrated master equation, one row per dephasing rate.
"""
import argparse

import numpy as np

from msreshape.msgate import MSParams, exact_dynamics, fit_structure, r_params, solve_coefficients

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--gammas", default="0.0025,0.005,0.01,0.02")
ap.add_argument("--exact", action="store_true")
ap.add_argument("--fock-dim", type=int, default=30)
args = ap.parse_args()

print("gamma,source,a1,a2,a3,a4,k2,residual,choi_eig4")
for g in (float(v) for v in args.gammas.split(",")):
    p = MSParams(gamma_p=g)
    c = solve_coefficients(*r_params(p))
    print(f"{g},analytic,{c.a1.real:.6f},{c.a2.real:.6f},{c.a3.real:.6f},{c.a4.real:.6f},{c.k2.real:.6f},,")
    if args.exact:
        res = exact_dynamics(p, fock_dim=args.fock_dim)
        f = fit_structure(res.channel)
        eig = np.sort(np.linalg.eigvalsh(res.choi.matrix))[::-1]
        row = ",".join(f"{complex(getattr(f, k)):.6f}" for k in ("a1", "a2", "a3", "a4", "k2"))
        print(f"{g},exact,{row},{f.residual:.2e},{eig[3]:.2e}")
