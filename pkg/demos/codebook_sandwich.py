"""
Real codes at tiny blocklengths
===============================

Builds actual covering codes for a binary source and measures their
excess-distortion probability exactly. The optimal rate at length n lies
between the ball-counting converse and any working code; the greedy code and
the type-union code give two such upper bounds.

    python demos/codebook_sandwich.py
"""
import numpy as np

from ratedisp import DistortionSpec, normal_approx_rate
from ratedisp import codebook_lab as lab

p = np.array([0.3, 0.7])
H = DistortionSpec.hamming(2)
D, eps = 0.25, 0.1

print(f"p = {p}, D = {D}, eps = {eps}")
print(f"{'n':>3} {'converse':>9} {'exact':>7} {'greedy':>7} {'union':>7} {'normal':>7} {'greedy excess':>14}")
for n in range(2, 15):
    conv = lab.converse_rate_bound(p, H, n, D, eps)
    exact = lab.exact_min_code(p, H, n, D, eps).rate if n <= 4 else float("nan")
    greedy = lab.greedy_cover_code(p, H, n, D, eps)
    dr = lab.union_recipe_redundancy(p, H, n, D, eps)
    union = lab.type_union_code(p, H, n, D, dr)
    excess = lab.coverage(p, H, greedy, D).excess_probability
    print(f"{n:3d} {conv:9.4f} {exact:7.4f} {greedy.rate:7.4f} {union.rate:7.4f} "
          f"{normal_approx_rate(p, H, D, eps, n):7.4f} {excess:14.4f}")

# sampled coverage agrees with the exact count
cb = lab.greedy_cover_code(p, H, 12, D, eps)
exact = lab.coverage(p, H, cb, D)
mc = lab.coverage(p, H, cb, D, mode="monte_carlo", samples=200_000, seed=2024)
print()
print(f"n=12 greedy code, {cb.size} words: exact {exact.covered_probability:.5f}, "
      f"sampled {mc.covered_probability:.5f} +/- {mc.mc_stderr:.5f}")
print(cb.to_text().splitlines()[0], "/ first word:", " ".join(map(str, cb.words[0])))
