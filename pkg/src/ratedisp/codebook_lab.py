"""Real fixed-rate codes at tiny blocklengths.

Source and reproduction words are indexed in lexicographic order (first
symbol most significant). A source word x is D-covered by a codeword y when
the summed per-letter distortion is at most nD; for integral distortion
matrices the comparison is done on integers against floor(nD).

Three coverage back ends share one interface:

* dense: a boolean L^n x K^n matrix, used when it fits in memory;
* translation: for difference measures x is covered by y iff (x - y) mod L
  lies in a fixed set of offsets, so balls are translates of one ball;
* direct: distances recomputed on demand.
"""
from __future__ import annotations

import functools
import itertools
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import EnumerationTooLarge, InputError, SearchSpaceTooLarge, Unreachable
from .finite_blocklength import rate_redundancy_oracle
from .rd_solver import RdfEvaluator, rdf_value
from .source_model import DistortionSpec

__all__ = [
    "Codebook",
    "CoverageResult",
    "coverage",
    "greedy_cover_code",
    "exact_min_code",
    "type_union_code",
    "union_recipe_redundancy",
    "converse_rate_bound",
    "ENUMERATION_CAP",
]

log = logging.getLogger(__name__)

ENUMERATION_CAP = 2**24  # source words for exact coverage
SEARCH_CAP = 2**16  # source or reproduction words for code construction
DENSE_CAP = 2**24  # entries of the dense coverage matrix
EXACT_CAP = 20  # words on each side for exhaustive search
MC_SAMPLES = 10**6
_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Codebook:
    n: int
    words: np.ndarray  # (M, n) reproduction symbol indices
    K: int

    def __post_init__(self):
        w = np.asarray(self.words, dtype=np.int64).reshape(-1, self.n)
        if w.shape[0] < 1:
            raise InputError("a codebook needs at least one word")
        if w.min() < 0 or w.max() >= self.K:
            raise InputError(f"symbols must lie in 0..{self.K - 1}")
        if np.unique(w, axis=0).shape[0] != w.shape[0]:
            raise InputError("codebook words must be distinct")
        w.setflags(write=False)
        object.__setattr__(self, "words", w)

    @property
    def size(self) -> int:
        return self.words.shape[0]

    @property
    def rate(self) -> float:
        """Nats per symbol."""
        return math.log(self.size) / self.n

    def indices(self) -> np.ndarray:
        return self.words @ (self.K ** np.arange(self.n - 1, -1, -1))

    def to_text(self) -> str:
        lines = [f"n={self.n} K={self.K}"]
        lines += [" ".join(str(int(s)) for s in w) for w in self.words]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Codebook":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise InputError("empty codebook text")
        try:
            head = dict(tok.split("=") for tok in lines[0].split())
            n, K = int(head["n"]), int(head["K"])
            words = [[int(s) for s in ln.split()] for ln in lines[1:]]
        except (KeyError, ValueError) as exc:
            raise InputError(f"malformed codebook text: {exc}") from exc
        if any(len(w) != n for w in words):
            raise InputError(f"every word must have {n} symbols")
        return cls(n=n, words=np.array(words, dtype=np.int64).reshape(-1, n), K=K)

    @classmethod
    def from_indices(cls, n: int, K: int, idx) -> "Codebook":
        return cls(n=n, words=_digits(np.asarray(idx, dtype=np.int64), K, n), K=K)


@dataclass(frozen=True)
class CoverageResult:
    covered_probability: float
    method: str  # "exact_enumeration" or "monte_carlo"
    mc_stderr: float | None = None
    seed: int | None = None
    samples: int | None = None

    @property
    def excess_probability(self) -> float:
        return 1.0 - self.covered_probability

    def to_dict(self) -> dict:
        return {"covered_probability": self.covered_probability, "method": self.method,
                "mc_stderr": self.mc_stderr, "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _digits(idx, base, n):
    idx = np.asarray(idx, dtype=np.int64)
    powers = base ** np.arange(n - 1, -1, -1, dtype=np.int64)
    return (idx[..., None] // powers) % base


def _all_words(base, n):
    return np.array(list(itertools.product(range(base), repeat=n)), dtype=np.int64).reshape(-1, n)


class _Lab:
    """Coverage structure for one (source, distortion, n, D)."""

    def __init__(self, probs, dist: DistortionSpec, n: int, D: float,
                 source_cap: int = SEARCH_CAP, repro_cap: int = SEARCH_CAP, dense: bool = False):
        p = np.asarray(getattr(probs, "probs", probs), dtype=float)
        d = np.asarray(dist.matrix, dtype=float)
        L, K = d.shape
        if p.size != L:
            raise InputError(f"source has {p.size} letters, distortion has {L} rows")
        if n < 1:
            raise InputError("blocklength must be positive")
        if L**n > source_cap:
            raise EnumerationTooLarge(f"{L}^{n} source words exceed the cap {source_cap}")
        if K**n > repro_cap:
            raise EnumerationTooLarge(f"{K}^{n} reproduction words exceed the cap {repro_cap}")
        self.p, self.d, self.n, self.D = p, d, n, D
        self.L, self.K = L, K
        self.NX, self.NY = L**n, K**n
        self.integral = dist.is_integral
        if self.integral:
            self.dint = np.rint(d).astype(np.int64)
        self.thr = _threshold(dist, n, D)
        self.src = _all_words(L, n)
        logp = np.log(p)
        self.prob = np.exp(logp[self.src].sum(axis=1))
        self.rep = _all_words(K, n)
        self.powers = L ** np.arange(n - 1, -1, -1, dtype=np.int64)
        self.mode = "direct"
        self.cov = None
        self.offsets = None
        if dist.kind in ("hamming", "difference") and not dense:
            self.mode = "translation"
            self.offsets = self._offsets(dist)
        elif self.NX * self.NY <= DENSE_CAP:
            self.mode = "dense"
            self.cov = self._dense()

    def _within(self, s):
        return s <= self.thr

    def _dense(self):
        dm = self.dint if self.integral else self.d
        cov = np.empty((self.NX, self.NY), dtype=bool)
        rows = max(1, 2**22 // self.NY)
        for a in range(0, self.NX, rows):
            xs = self.src[a:a + rows]
            s = np.zeros((xs.shape[0], self.NY), dtype=dm.dtype)
            for k in range(self.n):
                s += dm[xs[:, k][:, None], self.rep[:, k][None, :]]
            cov[a:a + rows] = self._within(s)
        return cov

    def _offsets(self, dist):
        prof = np.rint(dist.profile).astype(np.int64) if self.integral else dist.profile
        s = prof[self.src].sum(axis=1)
        return np.flatnonzero(self._within(s))

    def _shift(self, idx, offsets, sign):
        a = self.src[np.atleast_1d(idx)]
        b = self.src[offsets]
        return (((a[:, None, :] + sign * b[None, :, :]) % self.L) @ self.powers)

    def distances(self, y):
        dm = self.dint if self.integral else self.d
        return dm[self.src, self.rep[y][None, :]].sum(axis=1)

    def ball(self, y) -> np.ndarray:
        """Source indices covered by reproduction word ``y``."""
        if self.mode == "dense":
            return np.flatnonzero(self.cov[:, y])
        if self.mode == "translation":
            # x - y in offsets
            return np.sort(self._shift(y, self.offsets, 1)[0])
        return np.flatnonzero(self._within(self.distances(y)))

    def coverers(self, xs) -> list[np.ndarray]:
        """For each source index, the reproduction words covering it."""
        if self.mode == "dense":
            return [np.flatnonzero(self.cov[x]) for x in xs]
        if self.mode == "translation":
            return list(self._shift(xs, self.offsets, -1))
        dm = self.dint if self.integral else self.d
        return [np.flatnonzero(self._within(dm[self.src[x][None, :], self.rep].sum(axis=1)))
                for x in xs]

    def ball_masses(self, weights) -> np.ndarray:
        """sum_x weights[x] [x covered by y] for every y."""
        w = np.asarray(weights, dtype=float)
        if self.mode == "dense":
            return w @ self.cov
        if self.mode == "translation":
            # correlation over the group Z_L^n
            shape = (self.L,) * self.n
            ind = np.zeros(self.NX)
            ind[self.offsets] = 1.0
            axes = tuple(range(self.n))
            spec = np.fft.rfftn(w.reshape(shape)) * np.conj(np.fft.rfftn(ind.reshape(shape)))
            out = np.fft.irfftn(spec, s=shape, axes=axes).ravel()
            return np.where(np.abs(out) < 1e-15 * max(1.0, w.sum()), 0.0, out)
        return np.array([w[self.ball(y)].sum() for y in range(self.NY)])


@functools.lru_cache(maxsize=4)
def _cached_lab(pkey, dkey, shape, kind, n, D):
    dist = DistortionSpec(np.frombuffer(dkey).reshape(shape), kind=kind)
    return _Lab(np.array(pkey), dist, n, D)


def _lab(source, dist, n, D) -> _Lab:
    p = np.asarray(getattr(source, "probs", source), dtype=float)
    d = np.ascontiguousarray(dist.matrix, dtype=float)
    return _cached_lab(tuple(p.tolist()), d.tobytes(), d.shape, dist.kind, int(n), float(D))


def _greedy(lab: _Lab, weights, target):
    """Add the word with the largest uncovered weight until ``target`` is covered.

    Gains within a relative 1e-12 of the maximum count as ties and the lowest
    index wins.
    """
    w = np.asarray(weights, dtype=float).copy()
    gain = lab.ball_masses(w)
    covered = 0.0
    chosen = []
    while covered < target - _TOL * max(1.0, target):
        best = gain.max()
        if best <= _TOL * max(1.0, target):
            raise Unreachable(f"covered weight {covered:.6g} cannot reach {target:.6g}")
        y = int(np.flatnonzero(gain >= best - _TOL * best)[0])
        chosen.append(y)
        new = lab.ball(y)
        new = new[w[new] > 0]
        covered += w[new].sum()
        if lab.mode == "translation":
            delta = np.zeros_like(w)
            delta[new] = w[new]
            gain -= lab.ball_masses(delta)
        else:
            for x, ys in zip(new, lab.coverers(new)):
                gain[ys] -= w[x]
        w[new] = 0.0
        gain[y] = 0.0
    return chosen


def greedy_cover_code(source, dist: DistortionSpec, n: int, D: float, eps: float) -> Codebook:
    """Greedy max-coverage code with excess-distortion probability at most ``eps``."""
    lab = _lab(source, dist, n, D)
    ys = _greedy(lab, lab.prob, 1.0 - eps)
    return Codebook.from_indices(n, lab.K, ys)


def exact_min_code(source, dist: DistortionSpec, n: int, D: float, eps: float) -> Codebook:
    """Smallest codebook with coverage >= 1 - eps, by branch-and-bound.

    Among the minimum-size codes the one with the largest coverage is
    returned; subsets are explored in lexicographic order and only a strict
    improvement replaces the incumbent, so ties go to the lexicographically
    smallest code.
    """
    try:
        lab = _Lab(source, dist, n, D, source_cap=EXACT_CAP, repro_cap=EXACT_CAP, dense=True)
    except EnumerationTooLarge as exc:
        raise SearchSpaceTooLarge(str(exc)) from exc
    cov = lab.cov
    prob = lab.prob
    target = 1.0 - eps - _TOL
    NY = lab.NY

    def search(size, start, chosen, mask):
        covered = prob[mask].sum()
        if covered >= target:
            return list(chosen)
        left = size - len(chosen)
        if left == 0 or start >= NY:
            return None
        gains = prob[~mask] @ cov[~mask][:, start:]
        if covered + np.sort(gains)[::-1][:left].sum() < target:
            return None
        for y in range(start, NY - left + 1):
            chosen.append(y)
            found = search(size, y + 1, chosen, mask | cov[:, y])
            chosen.pop()
            if found is not None:
                return found
        return None

    def best_of_size(size):
        best = [-1.0, None]

        def visit(start, chosen, mask):
            covered = prob[mask].sum()
            left = size - len(chosen)
            if left == 0:
                if covered > best[0] + _TOL:
                    best[0], best[1] = covered, list(chosen)
                return
            gains = prob[~mask] @ cov[~mask][:, start:]
            if covered + np.sort(gains)[::-1][:left].sum() <= best[0] + _TOL:
                return
            for y in range(start, NY - left + 1):
                chosen.append(y)
                visit(y + 1, chosen, mask | cov[:, y])
                chosen.pop()

        visit(0, [], np.zeros(lab.NX, dtype=bool))
        return best[1]

    for size in range(1, NY + 1):
        if search(size, 0, [], np.zeros(lab.NX, dtype=bool)) is not None:
            return Codebook.from_indices(n, lab.K, best_of_size(size))
    raise Unreachable("even the full reproduction space misses the coverage target")


def _type_counts(lab):
    return np.stack([(lab.src == a).sum(axis=1) for a in range(lab.L)], axis=1)


def type_union_code(source, dist: DistortionSpec, n: int, D: float, delta_r: float,
                    restrict_typical: bool = True) -> Codebook:
    """Union of complete type-class coverings over {q : R(q, D) <= R(p, D) + delta_r}.

    With ``restrict_typical`` only types within squared distance L log(n) / n
    of p are covered. Each class is covered greedily by word counts until
    every member is covered.
    """
    lab = _lab(source, dist, n, D)
    p = lab.p
    counts = _type_counts(lab)
    uniq, inverse = np.unique(counts, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    rp = rdf_value(p, dist, D, memo=False)
    rdf = RdfEvaluator(dist, D)
    chosen: list[int] = []
    seen = set()
    for t, k in enumerate(uniq):
        q = k / n
        if restrict_typical and np.sum((q - p) ** 2) > lab.L * math.log(n) / n:
            continue
        if rdf(q) > rp + delta_r + 1e-12:
            continue
        members = (inverse == t).astype(float)
        for y in _greedy(lab, members, members.sum()):
            if y not in seen:
                seen.add(y)
                chosen.append(y)
    if not chosen:
        raise Unreachable("no type satisfies the rate condition")
    return Codebook.from_indices(n, lab.K, chosen)


def union_recipe_redundancy(source, dist: DistortionSpec, n: int, D: float, eps: float) -> float:
    """Redundancy dR whose type-tail probability is at most eps - 2L/n^2.

    Returns ``inf`` when eps - 2L/n^2 is negative; every typical type is then
    covered.
    """
    p = np.asarray(getattr(source, "probs", source), dtype=float)
    return rate_redundancy_oracle(p, dist, D, eps, n, eps_offset=-2.0 * p.size / n**2)


def converse_rate_bound(source, dist: DistortionSpec, n: int, D: float, eps: float) -> float:
    """Ball-counting lower bound (1/n) ln M with M = ceil((1 - eps) / max ball mass)."""
    lab = _lab(source, dist, n, D)
    top = float(lab.ball_masses(lab.prob).max())
    M = max(1, math.ceil((1.0 - eps) / top - 1e-12))
    return math.log(M) / n


def _threshold(dist, n, D):
    if dist.is_integral:
        return math.floor(n * D + 1e-9)
    return n * D + 1e-9 * max(1.0, n * D)


def _covered_mask(p, dist: DistortionSpec, codebook: Codebook, D: float):
    """Boolean mask over all L^n source words and their probabilities."""
    n, L = codebook.n, p.size
    NX = L**n
    powers = L ** np.arange(n - 1, -1, -1, dtype=np.int64)
    d = np.rint(dist.matrix).astype(np.int64) if dist.is_integral else np.asarray(dist.matrix, float)
    thr = _threshold(dist, n, D)
    mask = np.zeros(NX, dtype=bool)
    chunk = 1 << 16
    words = codebook.words
    if dist.kind in ("hamming", "difference"):
        prof = d[:, 0]
        for a in range(0, NX, chunk):
            z = _digits(np.arange(a, min(a + chunk, NX)), L, n)
            z = z[prof[z].sum(axis=1) <= thr]
            for y in words:
                mask[((y[None, :] + z) % L) @ powers] = True
    else:
        for a in range(0, NX, chunk):
            x = _digits(np.arange(a, min(a + chunk, NX)), L, n)
            best = np.full(x.shape[0], np.inf)
            for y in words:
                best = np.minimum(best, d[x, y[None, :]].sum(axis=1))
            mask[a:a + x.shape[0]] = best <= thr
    logp = np.log(p)
    prob = np.zeros(NX)
    for a in range(0, NX, chunk):
        x = _digits(np.arange(a, min(a + chunk, NX)), L, n)
        prob[a:a + x.shape[0]] = np.exp(logp[x].sum(axis=1))
    return mask, prob


def coverage(source, dist: DistortionSpec, codebook: Codebook, D: float, mode: str = "exact",
             samples: int = MC_SAMPLES, seed: int | None = None, rng=None) -> CoverageResult:
    """Probability that a source word is D-covered by ``codebook``.

    ``mode="exact"`` enumerates all L^n source words. ``mode="monte_carlo"``
    draws ``samples`` i.i.d. words from a generator seeded by ``seed`` (or the
    given ``rng``).
    """
    p = np.asarray(getattr(source, "probs", source), dtype=float)
    n = codebook.n
    L = p.size
    if dist.shape != (L, codebook.K):
        raise InputError(f"distortion shape {dist.shape} does not match L={L}, K={codebook.K}")
    if mode == "exact":
        if L**n > ENUMERATION_CAP:
            raise EnumerationTooLarge(f"{L}^{n} source words exceed the cap {ENUMERATION_CAP}")
        mask, prob = _covered_mask(p, dist, codebook, D)
        return CoverageResult(float(prob[mask].sum()), "exact_enumeration")
    if mode != "monte_carlo":
        raise InputError(f"unknown coverage mode {mode!r}")
    if rng is None:
        if seed is None:
            raise InputError("monte carlo coverage needs a seed or a generator")
        rng = np.random.default_rng(np.random.SeedSequence(seed))
    # the per-word indicator is looked up when the source space is small
    mask = _covered_mask(p, dist, codebook, D)[0] if L**n <= SEARCH_CAP else None
    d = np.asarray(dist.matrix, dtype=float)
    thr = _threshold(dist, n, D)
    powers = L ** np.arange(n - 1, -1, -1, dtype=np.int64)
    hits = 0
    chunk = 1 << 15
    for a in range(0, samples, chunk):
        m = min(chunk, samples - a)
        x = rng.choice(L, size=(m, n), p=p)
        if mask is not None:
            hits += int(mask[x @ powers].sum())
            continue
        best = np.full(m, np.inf)
        for c in codebook.words:
            best = np.minimum(best, d[x, c[None, :]].sum(axis=1))
        hits += int(np.sum(best <= thr))
    est = hits / samples
    stderr = math.sqrt(max(est * (1 - est), 0.0) / samples)
    return CoverageResult(est, "monte_carlo", mc_stderr=stderr, seed=seed, samples=samples)
