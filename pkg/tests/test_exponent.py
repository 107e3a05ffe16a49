import math

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import binary_entropy
from ratedisp.dispersion import dispersion_via_tilted
from ratedisp.errors import GridCapExceeded, Infeasible
from ratedisp.exponent import exponent, exponent_curve, max_rdf, simplex_grid
from ratedisp.rd_solver import rdf_value
from ratedisp.source_model import DistortionSpec, divergence


def binary_exponent(p1, D, R):
    # the minimizing type sits between p1 and 1/2 with h(q) - h(D) = R
    q = brentq(lambda x: binary_entropy(x) - binary_entropy(D) - R, p1, 0.5, xtol=1e-15)
    return divergence([q, 1 - q], [p1, 1 - p1]), q


def test_simplex_grid():
    g = simplex_grid(3, 4)
    assert len(g) == math.comb(6, 2)
    assert np.allclose(g.sum(axis=1), 1.0)


def test_zero_below_rdf(ham2):
    p = [0.2, 0.8]
    rp = rdf_value(p, ham2, 0.05)
    sol = exponent(p, ham2, 0.05, 0.5 * rp)
    assert sol.value == 0.0 and not sol.constraint_active
    assert exponent(p, ham2, 0.05, rp).value == 0.0


def test_binary_matches_closed_form(ham2):
    for p1, D, R in ((0.2, 0.05, 0.4), (0.2, 0.05, 0.33), (0.3, 0.1, 0.35)):
        ref, q = binary_exponent(p1, D, R)
        sol = exponent([p1, 1 - p1], ham2, D, R)
        assert sol.value == pytest.approx(ref, rel=1e-6, abs=1e-12)
        assert sol.minimizer[0] == pytest.approx(q, abs=1e-6)
        assert rdf_value(sol.minimizer, ham2, D) >= R - 1e-9


def test_uniform_is_infeasible():
    for L in (2, 3):
        H = DistortionSpec.hamming(L)
        u = np.full(L, 1.0 / L)
        with pytest.raises(Infeasible):
            exponent(u, H, 0.1, rdf_value(u, H, 0.1) + 0.01)


def test_above_max_rdf_is_infeasible(ham3):
    r_max, q = max_rdf(ham3, 0.1)
    assert np.allclose(q, 1 / 3, atol=1e-4)
    assert r_max == pytest.approx(math.log(3) - binary_entropy(0.1) - 0.1 * math.log(2), abs=1e-8)
    with pytest.raises(Infeasible):
        exponent([0.2, 0.3, 0.5], ham3, 0.1, r_max + 0.01)


def test_quadratic_regime_binary(ham2):
    p = np.array([0.2, 0.8])
    D, delta = 0.05, 0.02
    V = dispersion_via_tilted(p, ham2, D)[0]
    F = exponent(p, ham2, D, rdf_value(p, ham2, D) + delta).value
    assert F == pytest.approx(delta ** 2 / (2 * V), rel=0.10)


def test_quadratic_regime_ternary(ham3):
    # headroom to max R is only about 0.07 nats here, so stay well inside it
    p = np.array([0.2, 0.3, 0.5])
    D = 0.1
    V = dispersion_via_tilted(p, ham3, D)[0]
    rp = rdf_value(p, ham3, D)
    ratios = [2 * exponent(p, ham3, D, rp + t).value * V / t ** 2 for t in (0.005, 0.001)]
    assert ratios[0] == pytest.approx(1.0, rel=0.05)
    assert abs(ratios[1] - 1) < abs(ratios[0] - 1)


def test_zero_slope_at_rdf(ham2):
    p = [0.2, 0.8]
    rp = rdf_value(p, ham2, 0.05)
    slopes = [exponent(p, ham2, 0.05, rp + t).value / t for t in (1e-2, 1e-3)]
    assert slopes[1] < slopes[0]


def test_ternary_minimizer_is_feasible_and_beats_grid(ham3):
    p = np.array([0.2, 0.3, 0.5])
    D = 0.1
    R = rdf_value(p, ham3, D) + 0.05
    sol = exponent(p, ham3, D, R)
    assert rdf_value(sol.minimizer, ham3, D) >= R - 1e-7
    assert sol.value == pytest.approx(divergence(sol.minimizer, p), abs=1e-12)
    # no feasible point of a moderate grid does better
    grid = simplex_grid(3, 60)
    best = min(divergence(q, p) for q in grid if np.all(q > 0) and rdf_value(q, ham3, D) >= R)
    assert sol.value <= best + 1e-12


def test_curve_is_monotone_and_matches_single_points(ham2):
    p = [0.2, 0.8]
    rp = rdf_value(p, ham2, 0.05)
    rates = rp + np.array([-0.05, 0.0, 0.05, 0.1, 0.2, 0.5])
    curve = exponent_curve(p, ham2, 0.05, rates)
    assert curve[-1].infeasible
    vals = [c.value for c in curve if not c.infeasible]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    one = exponent_curve(p, ham2, 0.05, [rates[3]])[0]
    assert one.value == pytest.approx(exponent(p, ham2, 0.05, rates[3]).value, rel=1e-9)
    with pytest.raises(ValueError):
        exponent_curve(p, ham2, 0.05, rates[::-1])


def test_grid_cap():
    with pytest.raises(GridCapExceeded):
        exponent(np.full(5, 0.2), DistortionSpec.hamming(5), 0.1, 1.0)


def test_unreproducible_types_count_as_feasible():
    # letter 1 needs distortion at least 0.6, so D = 0.3 cannot serve types heavy in it
    d = DistortionSpec(np.array([[0.0, 1.0], [0.6, 1.0]]))
    p = np.array([0.8, 0.2])
    D = 0.3
    r_max, q = max_rdf(d, D)
    assert r_max == math.inf and q[1] == 1.0
    R = rdf_value(p, d, D) + 0.5
    sol = exponent(p, d, D, R)
    # the crossing is the boundary where q1 * 0.6 = D
    assert sol.minimizer[1] == pytest.approx(0.5, abs=1e-6)
    assert sol.value == pytest.approx(divergence([0.5, 0.5], p), rel=1e-6)
