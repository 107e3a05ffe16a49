"""Excess-distortion dispersion V(p, D) by three independent routes.

* derivatives: variance of the partial derivatives of R(q, D) in q at p.
  Only differences R'(i) - R'(1) affect the variance, and those are
  directional derivatives along e_i - e_1, which stay on the simplex.
* tilted: variance of f(i) = -log E exp(-lam [d(i, Xh) - D]) under the optimal
  reproduction marginal. This is the production route.
* exponent: inverse curvature of the excess-distortion exponent at zero
  excess rate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DOutOfRange,
    ExponentSolverFailure,
    Infeasible,
    InputError,
    PoorFit,
    RateDistortionError,
    SolverFailure,
    StepTooLarge,
)
from .exponent import exponent_curve, max_rdf
from .rd_solver import _lossless_capable, rd_at_distortion, rdf_value
from .source_model import DistortionSpec

__all__ = [
    "DispersionReport",
    "lossless_dispersion",
    "dispersion_via_derivatives",
    "dispersion_via_tilted",
    "dispersion_via_exponent",
    "fit_exponent_curvature",
    "hamming_dispersion",
    "estimate_d0",
    "dispersion_report",
    "weighted_variance",
]

log = logging.getLogger(__name__)

JUMP_REL = 1e-3
JUMP_TOL = 0.10


def weighted_variance(values, weights) -> float:
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    mean = weights @ values
    return float(weights @ (values - mean) ** 2)


def _probs(source):
    return np.asarray(getattr(source, "probs", source), dtype=float)


def lossless_dispersion(source) -> float:
    """Var[log p(X)], the dispersion at zero distortion."""
    p = _probs(source)
    return weighted_variance(np.log(p), p)


@dataclass(frozen=True, eq=False)
class DispersionReport:
    v_derivative: float | None
    v_exponent: float | None
    v_tilted: float | None
    f_values: np.ndarray | None
    r_prime_deltas: np.ndarray | None
    max_pairwise_rel_gap: float
    rate: float = float("nan")
    lam: float = float("nan")
    derivative_error: float | None = None
    jump_suspected: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        def arr(x):
            return None if x is None else [float(v) for v in x]

        return {
            "rate_nats": self.rate,
            "lambda": self.lam,
            "v_derivative": self.v_derivative,
            "v_exponent": self.v_exponent,
            "v_tilted": self.v_tilted,
            "f_values": arr(self.f_values),
            "r_prime_deltas": arr(self.r_prime_deltas),
            "max_pairwise_rel_gap": self.max_pairwise_rel_gap,
            "derivative_error": self.derivative_error,
            "jump_suspected": self.jump_suspected,
        }


def _rel_gap(a, b, floor=1e-12):
    return abs(a - b) / max(abs(a), abs(b), floor)


def _max_gap(values):
    vals = [v for v in values if v is not None]
    gaps = [_rel_gap(a, b) for i, a in enumerate(vals) for b in vals[i + 1:]]
    return max(gaps, default=0.0)


def _directional_derivatives(p, dist, D, step):
    L = p.size
    g = np.zeros(L)
    for i in range(1, L):
        u = np.zeros(L)
        u[i], u[0] = 1.0, -1.0
        plus = rdf_value(p + step * u, dist, D, memo=False)
        minus = rdf_value(p - step * u, dist, D, memo=False)
        g[i] = (plus - minus) / (2 * step)
    return g


def dispersion_via_derivatives(source, dist: DistortionSpec, D: float, step: float = 1e-4,
                               full_output: bool = False):
    """V as the variance of simplex-directional derivatives of R(., D).

    Central differences at ``step`` and ``step / 2`` combined by Richardson
    extrapolation. With ``full_output`` also returns the derivative vector
    (R'(i) - R'(1)) and an error estimate for it.
    """
    p = _probs(source)
    if np.any(p[1:] <= step) or p[0] <= step:
        raise StepTooLarge(f"step {step:g} leaves the simplex interior around {p}")
    try:
        coarse = _directional_derivatives(p, dist, D, step)
        fine = _directional_derivatives(p, dist, D, step / 2)
    except RateDistortionError as exc:
        raise SolverFailure(str(exc)) from exc
    g = (4 * fine - coarse) / 3
    v = weighted_variance(g, p)
    if full_output:
        return v, g, float(np.max(np.abs(g - fine)))
    return v


def dispersion_via_tilted(source, dist: DistortionSpec, D: float, solution=None):
    """Return ``(V, f)`` with f(i) = -log sum_xh qh(xh) exp(-lam (d(i, xh) - D)).

    E_p f(X) must reproduce R(p, D); a mismatch beyond 1e-6 raises
    SolverFailure. At D = 0 with a lossless-capable measure the limit
    f(i) = -log p_i is used.
    """
    p = _probs(source)
    d = dist.matrix
    if D == 0:
        if not _lossless_capable(d):
            raise DOutOfRange("zero distortion is not achievable for this measure")
        f = -np.log(p)
        return weighted_variance(f, p), f
    sol = solution or rd_at_distortion(p, dist, D)
    lam, qh = sol.lam, sol.repro_marginal
    with np.errstate(divide="ignore"):
        logq = np.log(qh)
    f = -logsumexp(logq[None, :] - lam * (d - D), axis=1)
    rate = sol.lagrangian - lam * D
    if abs(p @ f - rate) > 1e-6:
        raise SolverFailure(f"E[f(X)] = {p @ f:.9g} but R(p, D) = {rate:.9g}")
    return weighted_variance(f, p), f


def fit_exponent_curvature(deltas, values, degree: int = 2, max_residual: float = 0.05) -> float:
    """Fit F(delta) = delta^2 (c0 + c1 delta + ...) and return V = 1 / (2 c0).

    The higher-order terms absorb the cubic and quartic behaviour of F away
    from zero excess rate; only the quadratic coefficient is reported.
    """
    deltas = np.asarray(deltas, dtype=float)
    values = np.asarray(values, dtype=float)
    if deltas.size < 2 or np.any(deltas <= 0):
        raise InputError("need at least two positive excess rates")
    degree = min(degree, deltas.size - 1)
    ratio = values / deltas ** 2
    coef = np.polyfit(deltas, ratio, degree)
    c0 = coef[-1]
    if c0 <= 0:
        raise PoorFit(f"nonpositive curvature {c0:g}")
    resid = np.abs(np.polyval(coef, deltas) - ratio) / np.abs(ratio)
    if resid.max() > max_residual:
        raise PoorFit(f"relative residual {resid.max():.3g} exceeds {max_residual}")
    return float(1.0 / (2.0 * c0))


def _default_deltas(headroom):
    top = min(0.04, headroom / 4)
    return top * np.array([0.125, 0.25, 0.5, 1.0])


def dispersion_via_exponent(source, dist: DistortionSpec, D: float, deltas=None,
                            headroom_tol: float = 1e-9) -> float:
    """V as the inverse second derivative of F(R) at R = R(p, D).

    The default excess rates scale with the headroom max_q R(q, D) - R(p, D)
    so that every point lies well inside the quadratic regime. A source that
    already maximizes R has no headroom: the exponent jumps from zero to
    infinity and V = 0 is returned.
    """
    p = _probs(source)
    rp = rdf_value(p, dist, D, memo=False)
    try:
        r_max, _ = max_rdf(dist, D)
    except RateDistortionError as exc:
        raise ExponentSolverFailure(str(exc)) from exc
    headroom = r_max - rp
    if headroom <= headroom_tol:
        log.info("exponent jumps at zero excess rate; dispersion is 0")
        return 0.0
    deltas = _default_deltas(headroom) if deltas is None else np.sort(np.asarray(deltas, float))
    curve = exponent_curve(p, dist, D, rp + deltas)
    bad = [c for c in curve if c.infeasible]
    if bad:
        if all(c.infeasible and "above max_q" in c.reason for c in curve):
            return 0.0
        raise ExponentSolverFailure(bad[0].reason)
    return fit_exponent_curvature(deltas, [c.value for c in curve])


def hamming_dispersion(source, D: float) -> float:
    """Dispersion under Hamming distortion from the water-level construction.

    With letters sorted by probability, the optimal reproduction uses the m
    most likely letters and the level theta = (P_m - 1 + D) / (m - 1) (P_m
    their total mass) separates used from unused letters. V is the variance
    of log max(p(X), theta). Below D0 = (L - 1) p_min every letter is used
    and this is Var[log p(X)].
    """
    p = _probs(source)
    L = p.size
    if not 0 < D < 1 - p.max():
        raise DOutOfRange(f"D={D:g} outside (0, {1 - p.max():g})")
    srt = np.sort(p)[::-1]
    cum = np.cumsum(srt)
    for m in range(L, 1, -1):
        theta = (cum[m - 1] - 1 + D) / (m - 1)
        below = srt[m] if m < L else 0.0
        if srt[m - 1] > theta >= below:
            return weighted_variance(np.log(np.maximum(p, theta)), p)
    raise DOutOfRange("no consistent water level")


def _additive_backward(source, dist, D, tv_tol):
    p = _probs(source)
    sol = rd_at_distortion(p, dist, D)
    qh = sol.repro_marginal
    if np.any(qh <= 1e-9):
        return False
    L = p.size
    back = (p[:, None] * sol.channel) / qh[None, :]
    # row xh of the shifted table holds P(X = xh + z | xh) indexed by z
    shifted = np.array([np.roll(back[:, k], -k) for k in range(L)])
    tv = 0.5 * np.abs(shifted - shifted[0]).sum(axis=1).max()
    return tv <= tv_tol


def estimate_d0(source, dist: DistortionSpec, tv_tol: float = 1e-6, xtol: float = 1e-9) -> float:
    """Largest D for which the optimal backward channel is x = xh + z.

    Only meaningful for difference measures; found by bisection on the
    additivity test, which holds on (0, D0) and fails above it.
    """
    if dist.kind == "general":
        raise InputError("D0 is defined for difference distortion measures")
    p = _probs(source)
    lo = 0.0
    hi = dist.trivial_distortion(p)
    # the first sample must be additive; shrink toward zero until it is
    probe = hi / 2
    while not _additive_backward(p, dist, probe, tv_tol):
        hi = probe
        probe /= 2
        if probe < 1e-9:
            return 0.0
    lo = probe
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if _additive_backward(p, dist, mid, tv_tol):
            lo = mid
        else:
            hi = mid
    return lo


def _tilted_or_none(p, dist, D):
    try:
        return dispersion_via_tilted(p, dist, D)[0]
    except RateDistortionError:
        return None


def jump_suspected(source, dist: DistortionSpec, D: float) -> bool:
    """True when V at D(1 - 1e-3) and D(1 + 1e-3) differ by more than 10%."""
    p = _probs(source)
    lo = _tilted_or_none(p, dist, D * (1 - JUMP_REL))
    hi = _tilted_or_none(p, dist, D * (1 + JUMP_REL))
    if lo is None or hi is None:
        return True
    return _rel_gap(lo, hi) > JUMP_TOL


def dispersion_report(source, dist: DistortionSpec, D: float,
                      routes=("tilted", "derivative", "exponent"), step: float = 1e-4,
                      deltas=None, check_jumps: bool = True) -> DispersionReport:
    """Evaluate the requested routes and summarize their agreement."""
    p = _probs(source)
    notes = []
    v_t = v_d = v_e = None
    f = g = None
    err = None
    rate = lam = float("nan")
    if "tilted" in routes:
        if D > 0:
            sol = rd_at_distortion(p, dist, D)
            rate, lam = sol.lagrangian - sol.lam * D, sol.lam
            v_t, f = dispersion_via_tilted(p, dist, D, solution=sol)
        else:
            v_t, f = dispersion_via_tilted(p, dist, D)
            rate = rdf_value(p, dist, D)
    if "derivative" in routes:
        v_d, g, err = dispersion_via_derivatives(p, dist, D, step=step, full_output=True)
    if "exponent" in routes and D > 0:
        try:
            v_e = dispersion_via_exponent(p, dist, D, deltas=deltas)
        except (ExponentSolverFailure, PoorFit, Infeasible) as exc:
            notes.append(f"exponent route failed: {exc}")
    jump = False
    if check_jumps and D > 0:
        jump = jump_suspected(p, dist, D)
        if jump:
            notes.append("reproduction support changes near D; values not certified")
    return DispersionReport(
        v_derivative=v_d, v_exponent=v_e, v_tilted=v_t, f_values=f, r_prime_deltas=g,
        max_pairwise_rel_gap=_max_gap([v_d, v_e, v_t]), rate=rate, lam=lam,
        derivative_error=err, jump_suspected=jump, notes=notes)
