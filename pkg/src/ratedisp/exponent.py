"""Excess-distortion exponent F(R, p, D) = min { D(q||p) : R(q, D) >= R }.

The minimization runs in two phases. A grid over the simplex gives a
brute-force anchor: grid points are visited in order of increasing divergence
and the first one meeting the rate constraint is the grid minimum. The
refinement then parametrizes candidates by a direction ``u`` in the tangent
space of the simplex and the first point ``p + t u`` where the rate constraint
becomes active. Divergence grows along every such ray, so the exponent is the
minimum over directions of the divergence at that first crossing. This stays
on the simplex exactly and needs no derivatives of R.

A type whose minimal distortion exceeds D cannot be reproduced at all; its
rate is taken as +inf, so it always meets the rate constraint.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import brentq, minimize, minimize_scalar
from scipy.special import xlogy

from .errors import (
    DOutOfRange,
    ExponentSolverFailure,
    GridCapExceeded,
    Infeasible,
    RateDistortionError,
)
from .rd_solver import RdfEvaluator, rdf_value
from .source_model import DistortionSpec, divergence

__all__ = [
    "ExponentSolution",
    "exponent",
    "exponent_curve",
    "max_rdf",
    "simplex_grid",
]

log = logging.getLogger(__name__)

MAX_GRID_ALPHABET = 4
_FEAS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ExponentSolution:
    value: float
    minimizer: np.ndarray
    method: str
    constraint_active: bool
    rate: float = float("nan")
    direction: np.ndarray | None = None

    @property
    def infeasible(self) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class InfeasiblePoint:
    """Placeholder in a sweep where the exponent is infinite."""

    rate: float
    reason: str

    value = float("inf")

    @property
    def infeasible(self) -> bool:
        return True


def simplex_grid(size: int, resolution: int) -> np.ndarray:
    """All points of the simplex with coordinates in multiples of 1/resolution."""
    from .source_model import _compositions

    return _compositions(resolution, size) / resolution


def _divergences(grid, p):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sum(xlogy(grid, grid) - xlogy(grid, p[None, :]), axis=1)


def _row_minima(dist):
    return np.asarray(dist.matrix, dtype=float).min(axis=1)


def _unreachable(q, row_min, D):
    return float(q @ row_min) > D * (1 + 1e-12) + 1e-15


def _guarded(rdf, row_min, D):
    """R(., D) with +inf where D is below the type's minimal distortion."""

    def value(q):
        q = np.asarray(q, dtype=float)
        if _unreachable(q, row_min, D):
            return np.inf
        try:
            return rdf(q)
        except DOutOfRange:
            # rounding at the boundary q . row_min = D
            return np.inf

    return value


def _tangent_basis(size):
    return null_space(np.ones((1, size)))


def max_rdf(dist: DistortionSpec, D: float, resolution: int | None = None) -> tuple[float, np.ndarray]:
    """Largest R(q, D) over the simplex and a maximizing ``q``.

    Coarse grid (24 steps per coordinate, 12 for four letters) followed by
    Nelder-Mead in softmax coordinates from the three best grid points.
    Returns +inf when some letter cannot be reproduced within D. Results are
    memoized per (measure, D, resolution).
    """
    L = dist.shape[0]
    if resolution is None:
        resolution = 24 if L <= 3 else 12
    m = np.ascontiguousarray(dist.matrix, dtype=float)
    val, q = _max_rdf_cached(m.tobytes(), m.shape, float(D), int(resolution))
    return val, q.copy()


@lru_cache(maxsize=64)
def _max_rdf_cached(key, shape, D, resolution):
    d = np.frombuffer(key, dtype=float).reshape(shape)
    L = shape[0]
    row_min = d.min(axis=1)
    if row_min.max() > D:
        # the point mass on the worst letter cannot be reproduced within D
        return np.inf, np.eye(L)[int(np.argmax(row_min))]
    grid = simplex_grid(L, resolution)
    rdf = RdfEvaluator(d, D)
    values = np.array([rdf(q) for q in grid])
    order = np.argsort(-values, kind="stable")
    best_val, best_q = values[order[0]], grid[order[0]]
    if L == 2:
        res = minimize_scalar(lambda x: -rdf_value([x, 1 - x], d, D, memo=False),
                              bounds=(max(best_q[0] - 1.0 / resolution, 0.0),
                                      min(best_q[0] + 1.0 / resolution, 1.0)),
                              method="bounded", options={"xatol": 1e-12})
        if -res.fun > best_val:
            best_val, best_q = -res.fun, np.array([res.x, 1 - res.x])
        return float(best_val), best_q

    def neg(z):
        w = np.exp(np.concatenate([[0.0], z]) - np.max(np.concatenate([[0.0], z])))
        return -rdf(w / w.sum())

    for start in grid[order[:3]]:
        z0 = np.log(np.clip(start, 1e-6, None))
        z0 = z0[1:] - z0[0]
        res = minimize(neg, z0, method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-14, "maxiter": 4000})
        if -res.fun > best_val:
            w = np.exp(np.concatenate([[0.0], res.x]) - np.max(np.concatenate([[0.0], res.x])))
            best_val, best_q = -res.fun, w / w.sum()
    return float(best_val), best_q


class _RaySearch:
    """First point along ``p + t u`` where R(., D) reaches ``target``."""

    def __init__(self, p, dist, D, target, basis):
        self.p = p
        self.target = target
        self.basis = basis
        self.rdf = _guarded(RdfEvaluator(dist, D), _row_minima(dist), D)
        self.evaluations = 0

    def _r(self, q):
        self.evaluations += 1
        # cap +inf so the root finder sees a plain sign change
        return min(self.rdf(q), self.target + 1.0)

    def direction(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        u = self.basis @ (s / np.linalg.norm(s))
        return u

    def crossing(self, u, t_guess=None, scan=24):
        p = self.p
        neg = u < 0
        t_max = float(np.min(p[neg] / -u[neg])) if np.any(neg) else np.inf
        if not np.isfinite(t_max):
            return None

        def excess(t):
            q = np.clip(p + t * u, 0.0, None)
            return self._r(q / q.sum()) - self.target

        if t_guess is not None and 0 < t_guess < t_max:
            a, b = 0.9 * t_guess, min(1.1 * t_guess, t_max)
            fa, fb = excess(a), excess(b)
            if fa < 0 <= fb:
                return brentq(excess, a, b, xtol=1e-15, rtol=1e-14)
        ts = np.linspace(0.0, t_max, scan + 1)[1:]
        prev = 0.0
        for t in ts:
            if excess(t) >= 0:
                if excess(prev) >= 0:
                    return prev
                return brentq(excess, prev, t, xtol=1e-15, rtol=1e-14)
            prev = t
        return None

    def value(self, s, t_guess=None):
        u = self.direction(s)
        t = self.crossing(u, t_guess)
        if t is None:
            return np.inf, None
        q = np.clip(self.p + t * u, 0.0, None)
        q /= q.sum()
        return divergence(q, self.p), (t, q)


def _grid_phase(p, dist, D, R, resolution, budget):
    grid = simplex_grid(p.size, resolution)
    div = _divergences(grid, p)
    order = np.argsort(div, kind="stable")
    rdf = _guarded(RdfEvaluator(dist, D), _row_minima(dist), D)
    for count, idx in enumerate(order):
        if count >= budget:
            log.debug("grid phase budget of %d evaluations exhausted", budget)
            return None
        if rdf(grid[idx]) >= R - _FEAS_TOL:
            return grid[idx], float(div[idx])
    return None


def exponent(source, dist: DistortionSpec, D: float, R: float, resolution: int = 200,
             max_alphabet: int = MAX_GRID_ALPHABET, budget: int = 2000,
             start_direction=None, r_max: float | None = None) -> ExponentSolution:
    """Excess-distortion exponent at rate ``R`` (nats).

    Raises Infeasible when R exceeds max_q R(q, D): the exponent is infinite
    there. ``start_direction`` (a previous solution's ``direction``) narrows
    the refinement to a window around it.
    """
    p = np.asarray(getattr(source, "probs", source), dtype=float)
    if R < 0:
        raise ValueError("rate must be nonnegative")
    L = p.size
    if L > max_alphabet:
        raise GridCapExceeded(f"alphabet size {L} exceeds the grid cap {max_alphabet}")
    rp = rdf_value(p, dist, D, memo=False)
    if R <= rp:
        return ExponentSolution(0.0, p.copy(), "grid", False, rate=R)
    if r_max is None:
        r_max, _ = max_rdf(dist, D)
    if R > r_max + 1e-10:
        raise Infeasible(f"rate {R:.6g} above max_q R(q, D) = {r_max:.6g}")

    grid_hit = _grid_phase(p, dist, D, R, resolution, budget)
    basis = _tangent_basis(L)
    ray = _RaySearch(p, dist, D, R, basis)
    try:
        best = _refine(ray, p, basis, grid_hit, start_direction)
    except RateDistortionError as exc:
        raise ExponentSolverFailure(str(exc)) from exc
    if best is None:
        if grid_hit is None:
            raise Infeasible(f"no direction reaches rate {R:.6g}")
        q, val = grid_hit
        return ExponentSolution(val, q, "grid", True, rate=R)
    val, q, s = best
    if grid_hit is not None and grid_hit[1] < val:
        return ExponentSolution(grid_hit[1], grid_hit[0], "grid", True, rate=R)
    return ExponentSolution(val, q, "local_refined", True, rate=R, direction=s)


def _refine(ray, p, basis, grid_hit, start):
    L = p.size
    if L == 2:
        cands = []
        for s in (np.array([1.0]), np.array([-1.0])):
            val, hit = ray.value(s)
            if hit is not None:
                cands.append((val, hit[1], s))
        return min(cands, key=lambda c: c[0]) if cands else None

    starts = []
    if start is not None:
        starts.append((np.asarray(start, float), 0.15))
    else:
        if grid_hit is not None:
            starts.append((basis.T @ (grid_hit[0] - p), 0.6))
        starts.extend(_coarse_directions(ray, L))

    best = None
    for s0, width in starts:
        res = _local_min(ray, s0, width)
        if res is not None and (best is None or res[0] < best[0]):
            best = res
    return best


def _coarse_directions(ray, L, count=24):
    if L == 3:
        angles = np.linspace(0, 2 * np.pi, count, endpoint=False)
        dirs = np.column_stack([np.cos(angles), np.sin(angles)])
    else:
        # Fibonacci sphere in the 3-d tangent space
        k = np.arange(4 * count) + 0.5
        phi = np.arccos(1 - 2 * k / k.size)
        theta = np.pi * (1 + 5 ** 0.5) * k
        dirs = np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
    scored = []
    t_prev = None
    for s in dirs:
        val, hit = ray.value(s, t_prev)
        t_prev = hit[0] if hit is not None else None
        scored.append(val)
    scored = np.array(scored)
    if not np.any(np.isfinite(scored)):
        return []
    width = 2 * np.pi / count if L == 3 else 0.5
    return [(dirs[int(np.argmin(scored))], width)]


def _local_min(ray, s0, width):
    s0 = np.asarray(s0, float)
    if np.linalg.norm(s0) == 0:
        return None
    s0 = s0 / np.linalg.norm(s0)
    memo = {}

    def obj(s):
        val, hit = ray.value(s, memo.get("t"))
        if hit is not None:
            memo["t"] = hit[0]
            return val
        return 1e6

    if s0.size == 2:
        theta0 = float(np.arctan2(s0[1], s0[0]))
        res = minimize_scalar(lambda th: obj(np.array([np.cos(th), np.sin(th)])),
                              bounds=(theta0 - width, theta0 + width), method="bounded",
                              options={"xatol": 1e-9})
        s = np.array([np.cos(res.x), np.sin(res.x)])
    else:
        sim = [s0] + [s0 + width * 0.2 * e for e in np.eye(s0.size)]
        res = minimize(lambda z: obj(z), s0, method="Nelder-Mead",
                       options={"initial_simplex": np.array(sim), "xatol": 1e-9,
                                "fatol": 1e-16, "maxiter": 2000})
        s = res.x / np.linalg.norm(res.x)
    val, hit = ray.value(s, memo.get("t"))
    if hit is None:
        return None
    return val, hit[1], s


def exponent_curve(source, dist: DistortionSpec, D: float, r_grid, **kwargs) -> list:
    """Exponent at each rate of an ascending grid.

    Refinement is warm-started from the previous minimizer. A failing point is
    recorded as :class:`InfeasiblePoint` and the sweep continues.
    """
    r_grid = np.asarray(r_grid, dtype=float)
    if np.any(np.diff(r_grid) < 0):
        raise ValueError("rate grid must be sorted ascending")
    p = np.asarray(getattr(source, "probs", source), dtype=float)
    r_max = None
    out = []
    start = None
    for R in r_grid:
        try:
            if r_max is None and R > rdf_value(p, dist, D, memo=False):
                r_max, _ = max_rdf(dist, D)
            sol = exponent(p, dist, D, R, start_direction=start, r_max=r_max, **kwargs)
        except (Infeasible, ExponentSolverFailure) as exc:
            out.append(InfeasiblePoint(float(R), str(exc)))
            continue
        if sol.direction is not None:
            start = sol.direction
        out.append(sol)
    return out
