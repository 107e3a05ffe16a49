"""
Rate-distortion dispersion, three ways
======================================

Computes R(p, D) and the dispersion V(p, D) for a few small sources and
compares the three independent routes: the tilted information density, the
variance of simplex derivatives of R(., D), and the curvature of the
excess-distortion exponent.

    python demos/dispersion_tour.py
"""
import numpy as np

from ratedisp import DistortionSpec, dispersion_report, estimate_d0, lossless_dispersion

np.set_printoptions(precision=6, suppress=True)

# binary source, Hamming distortion: below D = p_min the dispersion is Var log p
p = np.array([0.2, 0.8])
H2 = DistortionSpec.hamming(2)
print("binary p =", p, " Var log p =", f"{lossless_dispersion(p):.6f}")
print(f"{'D':>6} {'R(p,D)':>10} {'tilted':>10} {'derivative':>11} {'exponent':>10}")
for D in (0.02, 0.05, 0.1, 0.15):
    rep = dispersion_report(p, H2, D)
    print(f"{D:6.2f} {rep.rate:10.6f} {rep.v_tilted:10.6f} {rep.v_derivative:11.6f} {rep.v_exponent:10.6f}")

# ternary source under a difference measure: V stays at Var log p up to D0
p3 = np.array([0.2, 0.3, 0.5])
d = DistortionSpec.difference([0, 1, 4])
d0 = estimate_d0(p3, d)
print()
print("ternary p =", p3, " profile [0, 1, 4]  D0 =", f"{d0:.4f}",
      " Var log p =", f"{lossless_dispersion(p3):.6f}")
print(f"{'D/D0':>6} {'R(p,D)':>10} {'tilted':>10} {'derivative':>11} {'jump?':>6}")
for frac in (0.25, 0.5, 0.9, 1.1, 1.3):
    D = frac * d0
    rep = dispersion_report(p3, d, D, routes=("tilted", "derivative"))
    print(f"{frac:6.2f} {rep.rate:10.6f} {rep.v_tilted:10.6f} {rep.v_derivative:11.6f} {str(rep.jump_suspected):>6}")

# uniform sources have no dispersion under Hamming distortion
u = np.full(3, 1 / 3)
rep = dispersion_report(u, DistortionSpec.hamming(3), 0.2)
print()
print("uniform ternary, D = 0.2: V =", f"{rep.v_tilted:.2e}", " exponent route:", rep.v_exponent)
