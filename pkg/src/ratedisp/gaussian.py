"""Quadratic-Gaussian source: closed forms and exact finite-n rate bounds.

The squared norm of n i.i.d. N(0, sigma^2) samples divided by sigma^2 is
chi-square with n degrees of freedom, so the probability that a source word
leaves the sphere of radius sqrt(n sigma^2 (1 + a)) is an incomplete gamma
function. No sampling is involved.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc, gammainccinv, gammaln

from .errors import DOutOfRange, DomainError, RateBelowRdf
from .finite_blocklength import q_inverse

__all__ = [
    "GaussianSpec",
    "gaussian_rdf",
    "gaussian_exponent",
    "gaussian_dispersion",
    "chi2_tail",
    "chi2_tail_inverse",
    "sphere_excess",
    "gaussian_achievable_rate",
    "gaussian_normal_approx",
    "gaussian_converse_rate",
    "gaussian_curve_csv",
    "geometric_blocklengths",
]


@dataclass(frozen=True)
class GaussianSpec:
    variance: float
    distortion: float
    eps: float = 0.05

    def __post_init__(self):
        if not self.variance > 0:
            raise DomainError("variance must be positive")
        if not 0 < self.distortion <= self.variance:
            raise DOutOfRange(f"need 0 < D <= variance, got D={self.distortion:g}")
        if not 0 < self.eps < 1:
            raise DomainError(f"need 0 < eps < 1, got {self.eps!r}")

    @property
    def ratio(self) -> float:
        return self.variance / self.distortion


def gaussian_rdf(spec: GaussianSpec) -> float:
    """R(sigma^2, D) = log(sigma^2 / D) / 2."""
    return 0.5 * math.log(spec.ratio)


def gaussian_exponent(spec: GaussianSpec, R: float) -> float:
    """Excess-distortion exponent (exp(2 dR) - 1 - 2 dR) / 2 with dR = R - R(D)."""
    dr = R - gaussian_rdf(spec)
    if dr < 0:
        raise RateBelowRdf(f"rate {R:g} is below the RDF {gaussian_rdf(spec):g}")
    return 0.5 * (math.expm1(2 * dr) - 2 * dr)


def gaussian_dispersion(spec: GaussianSpec | None = None) -> float:
    return 0.5


def chi2_tail(n: int, threshold: float) -> float:
    """Pr{chi2_n > threshold}."""
    if n < 1:
        raise DomainError("degrees of freedom must be positive")
    if threshold <= 0:
        return 1.0
    return float(gammaincc(0.5 * n, 0.5 * threshold))


def _chi2_logpdf(n, t):
    k = 0.5 * n
    return (k - 1) * math.log(t) - 0.5 * t - k * math.log(2.0) - gammaln(k)


def chi2_tail_inverse(n: int, eps: float) -> float:
    """Threshold t with Pr{chi2_n > t} = eps.

    Started from the incomplete-gamma inverse and polished by Newton steps on
    log Pr{chi2_n > t}, kept inside a bracket.
    """
    if n < 1:
        raise DomainError("degrees of freedom must be positive")
    if not 0 < eps < 1:
        raise DomainError(f"need 0 < eps < 1, got {eps!r}")
    t = 2.0 * float(gammainccinv(0.5 * n, eps))
    lo, hi = 0.0, math.inf
    for _ in range(40):
        tail = chi2_tail(n, t)
        if tail > eps:
            lo = t
        else:
            hi = t
        if abs(tail - eps) <= 1e-15 * eps or tail == 0:
            break
        # d/dt log tail = -pdf / tail
        step = (math.log(tail) - math.log(eps)) * math.exp(math.log(tail) - _chi2_logpdf(n, t))
        if abs(step) <= 4e-16 * t:
            break
        nxt = t + step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi) if math.isfinite(hi) else 2 * t
        t = nxt
    return t


def sphere_excess(n: int, eps: float) -> float:
    """alpha_n such that a source word leaves radius sqrt(n sigma^2 (1 + alpha_n)) w.p. eps."""
    return chi2_tail_inverse(n, eps) / n - 1.0


def gaussian_converse_rate(spec: GaussianSpec, n: int) -> float:
    """Rate of a D-ball count that just fills the sphere holding mass 1 - eps."""
    if n < 2:
        raise DOutOfRange("blocklength must be at least 2")
    return 0.5 * math.log(spec.ratio * (1.0 + sphere_excess(n, spec.eps)))


def gaussian_achievable_rate(spec: GaussianSpec, n: int, c0: float = 0.0) -> float:
    """Sphere-covering achievability: converse rate + (5 / 2n) log n + c0 / n.

    The covering constant is not known; ``c0`` defaults to 0.
    """
    return gaussian_converse_rate(spec, n) + 2.5 * math.log(n) / n + c0 / n


def gaussian_normal_approx(spec: GaussianSpec, n: int) -> float:
    return gaussian_rdf(spec) + math.sqrt(1.0 / (2 * n)) * q_inverse(spec.eps)


def gaussian_curve_csv(spec: GaussianSpec, n_list, bits: bool = False) -> str:
    scale = 1.0 / math.log(2) if bits else 1.0
    unit = "bits" if bits else "nats"
    out = io.StringIO()
    out.write("#schema=gaussian_curve/1\n")
    out.write(f"n,r_normal_{unit},r_achievable_{unit},r_converse_{unit},eps\n")
    for n in sorted(int(n) for n in n_list):
        vals = (gaussian_normal_approx(spec, n), gaussian_achievable_rate(spec, n),
                gaussian_converse_rate(spec, n))
        out.write(f"{n}," + ",".join(f"{v * scale:.9g}" for v in vals) + f",{spec.eps:.9g}\n")
    return out.getvalue()


def geometric_blocklengths(nmin: int, nmax: int, ratio: float) -> list[int]:
    """Blocklengths nmin, nmin*ratio, ... up to nmax (rounded, deduplicated)."""
    if nmin < 1 or nmax < nmin or ratio <= 1:
        raise DomainError("need 1 <= nmin <= nmax and ratio > 1")
    count = int(math.floor(math.log(nmax / nmin) / math.log(ratio) + 1e-9)) + 1
    vals = np.rint(nmin * ratio ** np.arange(count)).astype(int)
    return sorted(set(int(v) for v in vals if v <= nmax))
