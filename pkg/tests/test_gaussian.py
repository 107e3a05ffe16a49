import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2, norm

from ratedisp.errors import DomainError, DOutOfRange, RateBelowRdf
from ratedisp.finite_blocklength import q_inverse
from ratedisp.gaussian import (
    GaussianSpec,
    chi2_tail,
    chi2_tail_inverse,
    gaussian_achievable_rate,
    gaussian_converse_rate,
    gaussian_curve_csv,
    gaussian_dispersion,
    gaussian_exponent,
    gaussian_normal_approx,
    gaussian_rdf,
    geometric_blocklengths,
    sphere_excess,
)

SPEC = GaussianSpec(1.0, 0.25, 0.05)


def test_spec_validation():
    with pytest.raises(DOutOfRange):
        GaussianSpec(1.0, 1.5)
    with pytest.raises(DOutOfRange):
        GaussianSpec(1.0, 0.0)
    with pytest.raises(DomainError):
        GaussianSpec(-1.0, 0.5)
    with pytest.raises(DomainError):
        GaussianSpec(1.0, 0.5, eps=1.0)


def test_rdf_examples():
    assert gaussian_rdf(GaussianSpec(1.0, 1.0)) == 0.0
    assert gaussian_rdf(SPEC) == pytest.approx(math.log(2), abs=1e-15)
    assert gaussian_rdf(GaussianSpec(4.0, 1.0)) == pytest.approx(math.log(2), abs=1e-15)
    assert gaussian_dispersion(SPEC) == 0.5


def test_exponent_examples():
    r = gaussian_rdf(SPEC)
    assert gaussian_exponent(SPEC, r) == 0.0
    assert gaussian_exponent(SPEC, r + 0.1) == pytest.approx((math.exp(0.2) - 1.2) / 2, rel=1e-14)
    assert gaussian_exponent(SPEC, r + 0.1) == pytest.approx(0.0107014, abs=1e-7)
    for d in (0.001, 0.005, 0.01):
        assert gaussian_exponent(SPEC, r + d) == pytest.approx(d * d, rel=0.01)
    with pytest.raises(RateBelowRdf):
        gaussian_exponent(SPEC, r - 0.01)


def test_chi2_special_cases():
    for t in (0.1, 1.0, 7.5, 40.0):
        assert chi2_tail(2, t) == pytest.approx(math.exp(-t / 2), rel=1e-12)
        assert chi2_tail(1, t) == pytest.approx(2 * norm.sf(math.sqrt(t)), rel=1e-10)
    assert chi2_tail(5, 0.0) == 1.0
    with pytest.raises(DomainError):
        chi2_tail(0, 1.0)


@pytest.mark.parametrize("n", [1, 2, 3, 10, 100, 1000, 10000])
def test_chi2_inverse_round_trip(n):
    for eps in (1e-6, 0.01, 0.05, 0.5, 0.9):
        t = chi2_tail_inverse(n, eps)
        assert chi2_tail(n, t) == pytest.approx(eps, rel=1e-9)
        assert t == pytest.approx(chi2.isf(eps, n), rel=1e-9)


def test_chi2_inverse_domain():
    with pytest.raises(DomainError):
        chi2_tail_inverse(10, 0.0)
    with pytest.raises(DomainError):
        chi2_tail_inverse(0, 0.5)


def test_finite_n_examples():
    alpha = sphere_excess(100, 0.05)
    assert alpha == pytest.approx(chi2.isf(0.05, 100) / 100 - 1, rel=1e-12)
    assert alpha == pytest.approx(0.2434, abs=1e-4)
    conv = gaussian_converse_rate(SPEC, 100)
    assert conv == pytest.approx(0.5 * math.log((1 + alpha) / 0.25), abs=1e-14)
    assert gaussian_achievable_rate(SPEC, 100) == pytest.approx(conv + 0.025 * math.log(100), abs=1e-14)
    assert gaussian_achievable_rate(SPEC, 100, c0=2.0) == pytest.approx(
        gaussian_achievable_rate(SPEC, 100) + 0.02, abs=1e-14)
    assert gaussian_normal_approx(SPEC, 1000) == pytest.approx(
        math.log(2) + math.sqrt(0.0005) * q_inverse(0.05), abs=1e-14)
    assert gaussian_normal_approx(SPEC, 1000) == pytest.approx(0.729927, abs=1e-6)
    with pytest.raises(DOutOfRange):
        gaussian_converse_rate(SPEC, 1)


def test_median_excess():
    half = GaussianSpec(1.0, 0.25, 0.5)
    assert gaussian_normal_approx(half, 500) == gaussian_rdf(half)
    for n in (1000, 10000):
        assert sphere_excess(n, 0.5) * 1.5 * n == pytest.approx(-1.0, rel=0.01)


def test_normalized_excess_converges():
    for eps in (0.01, 0.05, 0.2):
        assert sphere_excess(10**4, eps) * math.sqrt(10**4 / 2) == pytest.approx(q_inverse(eps), abs=0.03)


def test_ordering():
    for eps in (0.01, 0.05, 0.2):
        spec = GaussianSpec(2.0, 0.3, eps)
        for n in (8, 20, 100, 1000, 10000):
            conv = gaussian_converse_rate(spec, n)
            assert conv <= gaussian_normal_approx(spec, n) <= gaussian_achievable_rate(spec, n)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 100.0), st.integers(2, 5000),
       st.floats(0.01, 0.5))
def test_scale_invariance(ratio, scale, n, eps):
    a = GaussianSpec(1.0, ratio, eps)
    b = GaussianSpec(scale, ratio * scale, eps)
    assert gaussian_rdf(a) == pytest.approx(gaussian_rdf(b), abs=1e-12)
    assert gaussian_converse_rate(a, n) == pytest.approx(gaussian_converse_rate(b, n), abs=1e-12)
    assert gaussian_achievable_rate(a, n) == pytest.approx(gaussian_achievable_rate(b, n), abs=1e-12)
    r = gaussian_rdf(a) + 0.05
    assert gaussian_exponent(a, r) == pytest.approx(gaussian_exponent(b, r), abs=1e-12)


def test_curve_csv():
    text = gaussian_curve_csv(SPEC, [1000, 100]).splitlines()
    assert text[0] == "#schema=gaussian_curve/1"
    assert text[1] == "n,r_normal_nats,r_achievable_nats,r_converse_nats,eps"
    assert [int(row.split(",")[0]) for row in text[2:]] == [100, 1000]
    assert float(text[2].split(",")[3]) == pytest.approx(gaussian_converse_rate(SPEC, 100), rel=1e-8)
    bits = gaussian_curve_csv(SPEC, [100], bits=True).splitlines()
    assert bits[1].startswith("n,r_normal_bits")
    assert float(bits[2].split(",")[1]) == pytest.approx(gaussian_normal_approx(SPEC, 100) / math.log(2), rel=1e-8)


def test_geometric_blocklengths():
    assert geometric_blocklengths(100, 10000, 10) == [100, 1000, 10000]
    assert geometric_blocklengths(100, 999, 10) == [100]
    assert geometric_blocklengths(4, 16, 1.5) == [4, 6, 9, 14]
    with pytest.raises(DomainError):
        geometric_blocklengths(10, 5, 2)
