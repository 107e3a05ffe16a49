"""
Gaussian source: finite-n bracket
=================================

For a Gaussian source with squared-error distortion the sphere-leaving
probability is an exact chi-square tail. This prints the converse, the normal
approximation and the sphere-covering achievable rate, and fits the gap
between achievable and normal rates against log(n)/n.

    python demos/gaussian_bracket.py
"""
import numpy as np

from ratedisp import (
    GaussianSpec,
    gaussian_achievable_rate,
    gaussian_converse_rate,
    gaussian_exponent,
    gaussian_normal_approx,
    gaussian_rdf,
    sphere_excess,
)

spec = GaussianSpec(variance=1.0, distortion=0.25, eps=0.05)
print(f"R(D) = {gaussian_rdf(spec):.6f} nats")
for dr in (0.01, 0.05, 0.1):
    print(f"  exponent at R(D)+{dr}: {gaussian_exponent(spec, gaussian_rdf(spec) + dr):.6e}")

ns = np.unique(np.rint(np.logspace(1, 4, 13)).astype(int))
print()
print(f"{'n':>6} {'alpha_n':>9} {'converse':>9} {'normal':>9} {'achievable':>11}")
gap = []
for n in ns:
    conv = gaussian_converse_rate(spec, n)
    nor = gaussian_normal_approx(spec, n)
    ach = gaussian_achievable_rate(spec, n)
    gap.append(ach - nor)
    print(f"{n:6d} {sphere_excess(n, spec.eps):9.5f} {conv:9.5f} {nor:9.5f} {ach:11.5f}")

big = ns >= 100
X = np.column_stack([np.log(ns[big]) / ns[big], 1.0 / ns[big]])
coef = np.linalg.lstsq(X, np.array(gap)[big], rcond=None)[0]
print()
print(f"fitted log(n)/n coefficient of achievable - normal: {coef[0]:.3f}")
