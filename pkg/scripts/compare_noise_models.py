"""Exact rho00 of the five-qubit circuit under bit-flip and depolarizing injection.

Shows the behaviour near theta0 = 0 (bit flips corrected, depolarizing not)
and the slope difference between the two models.
"""
import math

from msreshape.harness import THETA0_DEFAULT, NoiseInjection, build_five_qubit, exact_estimator, prepare, simulate_density

print("kind,rate,theta0_over_pi,rho00")
for kind in ("bit_flip", "depolarizing"):
    for p in (0.02, 0.05, 0.1):
        for t in THETA0_DEFAULT:
            prep = prepare(build_five_qubit(math.pi / 9, t))
            rho = simulate_density(prep.circuit, (NoiseInjection(kind, p),), prep.encoding)
            print(f"{kind},{p},{t / math.pi:.3f},{exact_estimator(rho, 'five_qubit'):.6f}")
