"""Rate-distortion function of a discrete source by alternating minimization.

The solver is parametrized by the slope ``lam >= 0`` of the R(D) curve. For
a fixed slope, the Blahut-Arimoto updates

    W(xh|x) ~ qh(xh) exp(-lam d(x, xh)),    qh <- p^T W

converge to the tangent point of slope ``-lam``. Convergence is measured by
the standard gap ``max_k log c_k`` between the upper and lower bounds on the
Lagrangian ``R + lam D``. Once the iterates are close, the reproduction
marginal is polished by Newton's method on its active support, which brings
the Lagrangian to machine precision. Targeting a distortion value is then a
one-dimensional root search over ``lam``.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DOutOfRange, NoConvergence
from .source_model import DistortionSpec, entropy

__all__ = [
    "RdSolution",
    "rd_at_slope",
    "rd_at_distortion",
    "rdf_value",
    "mutual_information",
    "clear_memo",
    "RdfEvaluator",
]

log = logging.getLogger(__name__)

MAX_ITER = 100_000
PRUNE = 1e-12
BA_WARMUP = 2000
_LAM_MAX = 1e7


@dataclass(frozen=True, eq=False)
class RdSolution:
    """One point on the rate-distortion curve (rate in nats)."""

    rate: float
    distortion: float
    lam: float
    channel: np.ndarray
    repro_marginal: np.ndarray
    lagrangian: float
    gap: float
    iterations: int

    @property
    def support_size(self) -> int:
        """Number of reproduction letters in use (K')."""
        return int(np.count_nonzero(self.repro_marginal > PRUNE))


def mutual_information(p, channel) -> float:
    p = np.asarray(p, dtype=float)
    W = np.asarray(channel, dtype=float)
    out = p @ W
    mask = W > 0
    ratio = np.ones_like(W)
    ratio[mask] = W[mask] / np.broadcast_to(out, W.shape)[mask]
    return float(np.sum(p[:, None] * np.where(mask, W * np.log(ratio), 0.0)))


class _SlopeProblem:
    """Dual problem for a fixed slope: minimize -sum_x p_x log (A qh)_x."""

    def __init__(self, p, d, lam):
        self.p = p
        self.d = d
        self.lam = lam
        self.shift = d.min(axis=1)
        self.A = np.exp(-lam * (d - self.shift[:, None]))
        self.offset = lam * float(p @ self.shift)

    def objective(self, q):
        Z = self.A @ q
        return -float(self.p @ np.log(Z)) + self.offset

    def multipliers(self, q):
        Z = self.A @ q
        return (self.p / Z) @ self.A

    def blahut_arimoto(self, q, tol, max_iter):
        A, p = self.A, self.p
        gap = np.inf
        for it in range(1, max_iter + 1):
            c = (p / (A @ q)) @ A
            gap = float(np.log(c.max()))
            if gap < tol:
                return q, gap, it
            revive = (q == 0) & (c > 1.0)
            q = q * c
            q[revive] = 1e-6
            q[(q < PRUNE) & (c < 1.0)] = 0.0
            q /= q.sum()
        return q, gap, max_iter

    def newton(self, q, max_iter=60):
        """Equality-constrained Newton on the support of ``q``.

        Steps are cut short of the boundary, and a letter is dropped once its
        mass is negligible and the step pushes it further down. The caller
        checks the optimality conditions off the support afterwards.
        """
        p = self.p
        q = q.copy()
        for _ in range(max_iter):
            S = np.flatnonzero(q > 0)
            AS = self.A[:, S]
            qs = q[S]
            Z = AS @ qs
            w = p / Z
            c = w @ AS
            if np.max(np.abs(c - 1.0)) < 1e-14:
                break
            m = S.size
            if m == 1:
                break
            H = (AS * (w / Z)[:, None]).T @ AS
            kkt = np.zeros((m + 1, m + 1))
            kkt[:m, :m] = H
            kkt[:m, m] = 1.0
            kkt[m, :m] = 1.0
            rhs = np.concatenate([c, [0.0]])
            step = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:m]
            step -= step.sum() / m
            neg = step < 0
            if np.any(neg):
                ratios = qs[neg] / -step[neg]
                k = int(np.argmin(ratios))
                if ratios[k] <= 1.0:
                    if qs[neg][k] < 1e-10:
                        q[S[neg][k]] = 0.0
                        q /= q.sum()
                        continue
                    # stop short of the boundary; small letters need not vanish
                    step = step * (0.9 * ratios[k])
            f0 = -float(p @ np.log(Z))
            slope = -float(c @ step)
            t = 1.0
            while t > 1e-12:
                trial = qs + t * step
                f1 = -float(p @ np.log(AS @ trial))
                if f1 <= f0 + 1e-4 * t * slope + 1e-15 * abs(f0):
                    break
                t *= 0.5
            else:
                break
            q[S] = trial
            q[q < 0] = 0.0
            q /= q.sum()
            if np.max(np.abs(t * step)) < 1e-16:
                break
        return q

    def solve(self, q0, tol, max_iter):
        q = q0.copy()
        total = 0
        gap = np.inf
        for _ in range(20):
            # a short warm-up; slow BA tails are left to Newton
            q, gap, it = self.blahut_arimoto(q, max(tol, 1e-5), min(BA_WARMUP, max_iter - total))
            total += it
            if total >= max_iter and gap >= tol:
                break
            q = self.newton(q)
            c = self.multipliers(q)
            gap = float(np.log(c.max()))
            if gap < tol:
                return q, max(gap, 0.0), total
            # a letter off the support wants mass back
            enter = np.flatnonzero((q == 0) & (c > 1.0 + 1e-12))
            if enter.size:
                q[enter] = 1e-6
                q /= q.sum()
        # plain iterations as a fallback
        q, gap, it = self.blahut_arimoto(q, tol, max(max_iter - total, 1))
        total += it
        if gap >= tol:
            raise NoConvergence(
                f"slope {self.lam:g}: Lagrangian gap {gap:.3e} after {total} iterations")
        return q, gap, total

    def solution(self, q, gap, iterations):
        p, d, lam = self.p, self.d, self.lam
        Z = self.A @ q
        W = self.A * q[None, :] / Z[:, None]
        W /= W.sum(axis=1, keepdims=True)
        out = p @ W
        rate = mutual_information(p, W)
        distortion = float(p @ np.sum(W * d, axis=1))
        lagrangian = -float(p @ np.log(Z)) + self.offset
        return RdSolution(rate=rate, distortion=distortion, lam=float(lam), channel=W,
                          repro_marginal=out, lagrangian=lagrangian, gap=gap,
                          iterations=iterations)


def _as_probs(source):
    return np.asarray(getattr(source, "probs", source), dtype=float)


def _zero_slope(p, d):
    expected = p @ d
    best = np.isclose(expected, expected.min(), rtol=0, atol=1e-15)
    q = best / best.sum()
    W = np.tile(q, (p.size, 1))
    return RdSolution(rate=0.0, distortion=float(expected.min()), lam=0.0, channel=W,
                      repro_marginal=q.astype(float), lagrangian=0.0, gap=0.0, iterations=0)


def rd_at_slope(source, dist: DistortionSpec, lam: float, tol: float = 1e-9,
                max_iter: int = MAX_ITER, init=None) -> RdSolution:
    """Point of the R(D) curve where the slope is ``-lam``.

    ``init`` optionally warm-starts the reproduction marginal; the default is
    uniform over the reproduction alphabet.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if lam < 0:
        raise ValueError("slope parameter must be nonnegative")
    p = _as_probs(source)
    d = dist.matrix if isinstance(dist, DistortionSpec) else np.asarray(dist, dtype=float)
    if lam == 0:
        return _zero_slope(p, d)
    prob = _SlopeProblem(p, d, lam)
    K = d.shape[1]
    q0 = np.full(K, 1.0 / K) if init is None else np.asarray(init, dtype=float).copy()
    q, gap, its = prob.solve(q0, tol, max_iter)
    return prob.solution(q, gap, its)


def _distortion_limits(p, d):
    return float(p @ d.min(axis=1)), float(np.min(p @ d))


def rd_at_distortion(source, dist: DistortionSpec, D: float, tol: float = 1e-9,
                     d_rtol: float = 1e-10) -> RdSolution:
    """Solve R(p, D) for a distortion strictly inside the nontrivial region.

    Raises DOutOfRange unless ``D_min < D < D_trivial``, where D_trivial is the
    best expected distortion of a constant reproduction.
    """
    p = _as_probs(source)
    d = dist.matrix
    d_min, d_triv = _distortion_limits(p, d)
    if not (D > max(d_min, 0.0) and D < d_triv):
        raise DOutOfRange(f"D={D:g} outside the open interval ({d_min:g}, {d_triv:g})")
    return _solve_for_distortion(p, d, D, tol, d_rtol)


class _Hit(Exception):
    pass


def _solve_for_distortion(p, d, D, tol, d_rtol, warm=None):
    K = d.shape[1]
    state = {"q": np.full(K, 1.0 / K)}
    cache = {}
    if warm is not None and warm[1].size == K:
        state["q"] = warm[1].copy()

    def solve(lam):
        if lam not in cache:
            sol = rd_at_slope(p, d, lam, tol=tol, init=state["q"])
            q = np.where(sol.repro_marginal > PRUNE, sol.repro_marginal, 0.0)
            state["q"] = q / q.sum()
            cache[lam] = sol
        return cache[lam]

    def excess(lam):
        err = solve(lam).distortion - D
        if abs(err) <= d_rtol * D:
            raise _Hit
        return err

    try:
        if warm is not None and warm[0] > 0:
            lo = hi = warm[0]
            if excess(lo) > 0:
                while excess(hi) > 0:
                    lo, hi = hi, hi * 1.25
                    if hi > _LAM_MAX:
                        raise NoConvergence(f"could not bracket the slope for D={D:g}")
            else:
                while lo > 1e-12 and excess(lo) < 0:
                    lo, hi = lo * 0.8, lo
                if lo <= 1e-12:
                    lo = 0.0
        else:
            lo, hi = 0.0, 1.0
            while excess(hi) > 0:
                lo, hi = hi, 2.0 * hi
                if hi > _LAM_MAX:
                    raise NoConvergence(f"could not bracket the slope for D={D:g}")
        brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    except _Hit:
        pass
    except RuntimeError as exc:
        raise NoConvergence(str(exc)) from exc
    best = min(cache.values(), key=lambda s: abs(s.distortion - D))
    if abs(best.distortion - D) > d_rtol * D:
        # D(lam) jumps where the reproduction support changes; keep the closest point
        log.debug("distortion target %.3g missed by %.2e", D, abs(best.distortion - D))
    return best


def _lossless_capable(d) -> bool:
    zero = d == 0
    return bool(np.all(zero.any(axis=1)) and np.all(zero.sum(axis=0) <= 1))


def _rdf_raw(q, d, D, tol):
    keep = q > 0
    q = q[keep] / q[keep].sum()
    d = d[keep]
    d_min, d_triv = _distortion_limits(q, d)
    if D >= d_triv:
        return 0.0
    if D <= d_min:
        if D == d_min and _lossless_capable(d):
            return entropy(q)
        raise DOutOfRange(f"D={D:g} below the smallest achievable distortion {d_min:g}")
    sol = _solve_for_distortion(q, d, D, tol, 1e-10)
    # tangent correction: R(D) >= L(lam) - lam D with equality at the optimum slope
    return max(sol.lagrangian - sol.lam * D, 0.0)


@functools.lru_cache(maxsize=1 << 18)
def _rdf_memo(qkey, dkey, shape, D, tol):
    q = np.array(qkey)
    d = np.frombuffer(dkey).reshape(shape)
    return _rdf_raw(q / q.sum(), d, D, tol)


def clear_memo():
    _rdf_memo.cache_clear()


def rdf_value(q, dist: DistortionSpec, D: float, tol: float = 1e-9, memo: bool = True) -> float:
    """R(q, D) in nats for any point ``q`` of the simplex.

    Unlike :func:`rd_at_distortion` this accepts types with zero entries and
    returns 0 for D at or above the trivial distortion of ``q``. With
    ``memo`` the result is cached under ``q`` rounded to 1e-12.
    """
    q = _as_probs(q)
    d = dist.matrix if isinstance(dist, DistortionSpec) else np.asarray(dist, dtype=float)
    if q.size != d.shape[0]:
        raise ValueError("alphabet size mismatch")
    if not memo:
        return _rdf_raw(q / q.sum(), d, float(D), tol)
    qkey = tuple(np.round(q, 12).tolist())
    return _rdf_memo(qkey, np.ascontiguousarray(d).tobytes(), d.shape, float(D), tol)


class RdfEvaluator:
    """R(q, D) at fixed ``D`` over many nearby ``q``, warm-starting each solve.

    Results depend on the call order only through solver tolerance, so sweeps
    in a fixed order are reproducible.
    """

    def __init__(self, dist: DistortionSpec, D: float, tol: float = 1e-9):
        self.d = dist.matrix if isinstance(dist, DistortionSpec) else np.asarray(dist, float)
        self.D = float(D)
        self.tol = tol
        self._warm = None
        self.calls = 0

    def __call__(self, q) -> float:
        q = _as_probs(q)
        self.calls += 1
        keep = q > 0
        if not keep.all():
            return _rdf_raw(q / q.sum(), self.d, self.D, self.tol)
        q = q / q.sum()
        d_min, d_triv = _distortion_limits(q, self.d)
        if self.D >= d_triv or self.D <= d_min:
            return _rdf_raw(q, self.d, self.D, self.tol)
        sol = _solve_for_distortion(q, self.d, self.D, self.tol, 1e-10, warm=self._warm)
        if sol.lam > 0:
            qh = np.where(sol.repro_marginal > PRUNE, sol.repro_marginal, 0.0)
            self._warm = (sol.lam, qh / qh.sum())
        return max(sol.lagrangian - sol.lam * self.D, 0.0)
