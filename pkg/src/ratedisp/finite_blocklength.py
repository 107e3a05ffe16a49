"""Finite-blocklength rate predictions for discrete memoryless sources.

The normal approximation R(p, D) + sqrt(V / n) Q^-1(eps) is compared with an
exact oracle built from type enumeration: the rate redundancy dR is the
smallest excess of R(P_x, D) over R(p, D) that the empirical type of a
length-n source word exceeds with probability at most eps.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, logsumexp, ndtri

from .dispersion import dispersion_via_tilted, weighted_variance
from .errors import AtlasTooLarge, DomainError, RateDistortionError, ZeroVariance
from .rd_solver import RdfEvaluator, rdf_value
from .source_model import DistortionSpec, enumerate_types

__all__ = [
    "q_function",
    "q_inverse",
    "normal_approx_rate",
    "type_rdf_table",
    "rate_redundancy_oracle",
    "berry_esseen_halfwidth",
    "berry_esseen_probability_halfwidth",
    "lemma2_check",
    "Lemma2Check",
    "RateRecord",
    "RateCurve",
    "rate_curve",
    "ORACLE_CAPS",
]

# largest blocklength for which the oracle enumerates types, per alphabet size
ORACLE_CAPS = {1: 10**6, 2: 100_000, 3: 300, 4: 60}
BE_CONSTANT = 0.5600
PROB_FLOOR = 1e-20
_TIE = 1e-12
_SQRT2 = math.sqrt(2.0)


def q_function(x):
    """Complementary standard normal CDF."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / _SQRT2)[()]


def q_inverse(eps: float) -> float:
    """Inverse of :func:`q_function` for 0 < eps < 1."""
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise DomainError(f"q_inverse needs 0 < eps < 1, got {eps!r}")
    x = -float(ndtri(eps))
    for _ in range(3):
        dens = math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
        if dens == 0:
            break
        step = (float(q_function(x)) - eps) / dens
        x += step
        if abs(step) < 1e-16 * max(1.0, abs(x)):
            break
    return x


def _probs(source):
    return np.asarray(getattr(source, "probs", source), dtype=float)


def normal_approx_rate(source, dist: DistortionSpec, D: float, eps: float, n: int,
                       V: float | None = None, rate: float | None = None) -> float:
    """Two-term approximation R(p, D) + sqrt(V / n) Q^-1(eps), in nats."""
    p = _probs(source)
    if rate is None:
        rate = rdf_value(p, dist, D)
    if V is None:
        V = dispersion_via_tilted(p, dist, D)[0] if D > 0 else weighted_variance(-np.log(p), p)
    return rate + math.sqrt(V / n) * q_inverse(eps)


def _check_oracle_cap(n, L):
    cap = ORACLE_CAPS.get(L, 0)
    if n > cap:
        raise AtlasTooLarge(f"oracle blocklength {n} exceeds the cap {cap} for L={L}")


def type_rdf_table(source, dist: DistortionSpec, D: float, n: int,
                   prob_floor: float = PROB_FLOOR):
    """Atlas of length-n types with R(q, D) for every type above ``prob_floor``.

    Returns ``(atlas, rates)``; types below the floor get NaN.
    """
    p = _probs(source)
    atlas = enumerate_types(n, p)
    rates = np.full(len(atlas), np.nan)
    keep = np.flatnonzero(atlas.log_probs >= math.log(prob_floor))
    rdf = RdfEvaluator(dist, D)
    types = atlas.types
    for j in keep:
        rates[j] = rdf(types[j])
    return atlas, rates


def _smallest_redundancy(excess, probs, target):
    """Smallest dR in {0} U {achieved positive excesses} with tail <= target."""
    if target < 0:
        return math.inf, 0.0
    pos = excess > _TIE
    vals = excess[pos]
    mass = probs[pos]
    if vals.size == 0:
        return 0.0, 0.0
    order = np.argsort(-vals, kind="stable")
    vals, mass = vals[order], mass[order]
    # group near-equal excess values
    starts = np.concatenate([[True], np.diff(vals) < -_TIE])
    group = np.cumsum(starts) - 1
    gvals = vals[starts]
    gmass = np.bincount(group, weights=mass)
    above = np.concatenate([[0.0], np.cumsum(gmass)[:-1]])  # mass strictly above each group
    tail0 = float(gmass.sum())
    if tail0 <= target:
        return 0.0, tail0
    # ascending scan over candidates
    for v, t in zip(gvals[::-1], above[::-1]):
        if t <= target:
            return float(v), float(t)
    return float(gvals[0]), 0.0


def rate_redundancy_oracle(source, dist: DistortionSpec, D: float, eps: float, n: int,
                           eps_offset: float = 0.0, prob_floor: float = PROB_FLOOR,
                           full_output: bool = False):
    """Exact rate redundancy dR at blocklength ``n`` by type enumeration.

    dR is the smallest value among 0 and the achieved excesses
    R(q, D) - R(p, D) for which Pr{R(P_x, D) - R(p, D) > dR} <= eps + eps_offset.
    Types with probability below ``prob_floor`` are skipped (their total mass
    is bounded by the number of types times the floor). A negative target
    returns ``inf``.
    """
    p = _probs(source)
    _check_oracle_cap(n, p.size)
    atlas, rates = type_rdf_table(p, dist, D, n, prob_floor)
    rp = rdf_value(p, dist, D, memo=False)
    known = ~np.isnan(rates)
    excess = rates[known] - rp
    probs = np.exp(atlas.log_probs[known])
    dr, tail = _smallest_redundancy(excess, probs, eps + eps_offset)
    if full_output:
        return dr, tail
    return dr


def berry_esseen_probability_halfwidth(source, dist: DistortionSpec, D: float, n: int,
                                       c_be: float = BE_CONSTANT, paper_form: bool = False):
    """Berry-Esseen bound on |Pr - Q(.)| for the average of f(X_k).

    Standard form ``c_be xi / (V^1.5 sqrt(n))``; ``paper_form`` uses the
    unnormalized ``6 xi / sqrt(n)``. xi is the third absolute central moment
    of f(X), which equals that of R'(X) since the two differ by a constant.
    """
    p = _probs(source)
    V, f = dispersion_via_tilted(p, dist, D)
    if V <= 1e-14:
        raise ZeroVariance("dispersion is zero; the normal approximation is exact")
    xi = float(p @ np.abs(f - p @ f) ** 3)
    if paper_form:
        return 6.0 * xi / math.sqrt(n)
    return c_be * xi / (V ** 1.5 * math.sqrt(n))


def berry_esseen_halfwidth(source, dist: DistortionSpec, D: float, n: int, eps: float,
                           c_be: float = BE_CONSTANT, paper_form: bool = False) -> float:
    """Rate-scale halfwidth: probability halfwidth over the density of dR.

    dR is approximately N(0, V / n), so near the eps-quantile its density is
    phi(Q^-1(eps)) sqrt(n / V).
    """
    p = _probs(source)
    hw = berry_esseen_probability_halfwidth(p, dist, D, n, c_be=c_be, paper_form=paper_form)
    V = dispersion_via_tilted(p, dist, D)[0]
    z = q_inverse(eps)
    dens = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) * math.sqrt(n / V)
    return hw / dens


@dataclass(frozen=True)
class Lemma2Check:
    lhs: float
    rhs: float
    holds: bool


def lemma2_check(source, n: int) -> Lemma2Check:
    """Exact Pr{||P_x - p||^2 > L log(n) / n} against the bound 2L / n^2."""
    p = _probs(source)
    L = p.size
    atlas = enumerate_types(n, p)
    dist2 = np.sum((atlas.types - p) ** 2, axis=1)
    outside = dist2 > L * math.log(n) / n
    lhs = float(np.exp(logsumexp(atlas.log_probs[outside]))) if outside.any() else 0.0
    rhs = 2.0 * L / n**2
    return Lemma2Check(lhs=lhs, rhs=rhs, holds=lhs <= rhs)


@dataclass
class RateRecord:
    n: int
    r_normal: float
    r_oracle: float | None = None
    be_halfwidth: float | None = None
    error: str | None = None


@dataclass
class RateCurve:
    records: list[RateRecord]
    eps: float
    source: np.ndarray
    D: float
    rate: float
    dispersion: float
    meta: dict = field(default_factory=dict)

    SCHEMA = "rate_curve/1"
    HEADER = ("n", "r_normal_nats", "r_oracle_nats", "be_halfwidth_nats", "eps")

    def to_csv(self, bits: bool = False) -> str:
        scale = 1.0 / math.log(2) if bits else 1.0
        header = [h.replace("_nats", "_bits") for h in self.HEADER] if bits else self.HEADER
        out = io.StringIO()
        out.write(f"#schema={self.SCHEMA}\n")
        out.write(",".join(header) + "\n")
        for r in self.records:
            row = [str(r.n), _fmt(r.r_normal, scale), _fmt(r.r_oracle, scale),
                   _fmt(r.be_halfwidth, scale), f"{self.eps:.9g}"]
            out.write(",".join(row) + "\n")
        return out.getvalue()


def _fmt(x, scale=1.0):
    return "" if x is None else f"{x * scale:.9g}"


def rate_curve(source, dist: DistortionSpec, D: float, eps: float, n_list,
               with_oracle: bool = False, c_be: float = BE_CONSTANT) -> RateCurve:
    """Normal approximation, optional exact oracle and Berry-Esseen halfwidth per n.

    Failures at one blocklength are recorded on that record only.
    """
    p = _probs(source)
    rate = rdf_value(p, dist, D, memo=False)
    V = dispersion_via_tilted(p, dist, D)[0]
    z = q_inverse(eps)
    records = []
    for n in sorted(int(n) for n in n_list):
        rec = RateRecord(n=n, r_normal=rate + math.sqrt(V / n) * z)
        errors = []
        if with_oracle:
            try:
                rec.r_oracle = rate + rate_redundancy_oracle(p, dist, D, eps, n)
            except RateDistortionError as exc:
                errors.append(f"oracle: {exc}")
        try:
            rec.be_halfwidth = berry_esseen_halfwidth(p, dist, D, n, eps, c_be=c_be)
        except ZeroVariance:
            pass
        rec.error = "; ".join(errors) or None
        records.append(rec)
    return RateCurve(records=records, eps=eps, source=p, D=D, rate=rate, dispersion=V)
