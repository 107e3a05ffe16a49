"""Discrete sources, single-letter distortion measures and types.

All logarithms are natural; rates are in nats.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from os import PathLike
from typing import Literal

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import (
    AtlasTooLarge,
    DimensionMismatch,
    InputError,
    NonPositiveMass,
    NotNormalized,
)

__all__ = [
    "DiscreteSource",
    "DistortionSpec",
    "TypeAtlas",
    "validate_source",
    "divergence",
    "entropy",
    "enumerate_types",
    "count_types",
    "load_problem",
    "parse_problem",
]

DEFAULT_ATLAS_CAP = 2_000_000


@dataclass(frozen=True, eq=False)
class DiscreteSource:
    """Probability vector with strictly positive entries summing to one."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).ravel()
        if p.size == 0:
            raise InputError("empty probability vector")
        if not np.all(np.isfinite(p)) or np.any(p <= 0):
            raise NonPositiveMass(f"all source probabilities must be positive, got {p.tolist()}")
        if abs(p.sum() - 1.0) > 1e-12:
            raise NotNormalized(f"probabilities sum to {p.sum():.15g}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def size(self) -> int:
        return self.probs.size

    def entropy(self) -> float:
        return entropy(self.probs)

    def __repr__(self):
        return f"DiscreteSource({np.array2string(self.probs, precision=6)})"


def validate_source(probs, strict: bool = False) -> DiscreteSource:
    """Build a :class:`DiscreteSource`, normalizing unless ``strict``.

    Raises NonPositiveMass for any entry <= 0 and, in strict mode,
    NotNormalized when the entries do not already sum to one within 1e-9.
    """
    p = np.asarray(probs, dtype=float).ravel()
    if p.size == 0:
        raise InputError("empty probability vector")
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        raise NonPositiveMass(f"all source probabilities must be positive, got {p.tolist()}")
    total = p.sum()
    if strict and abs(total - 1.0) > 1e-9:
        raise NotNormalized(f"probabilities sum to {total:.15g}")
    return DiscreteSource(p / total)


DistortionKind = Literal["general", "difference", "hamming"]


@dataclass(frozen=True, eq=False)
class DistortionSpec:
    """Bounded nonnegative L x K single-letter distortion matrix.

    ``kind="difference"`` requires a square matrix whose entry (x, xh) depends
    only on (x - xh) mod L; ``kind="hamming"`` is the 0/1 special case.
    """

    matrix: np.ndarray
    kind: DistortionKind = "general"
    d_max: float = field(init=False)

    def __post_init__(self):
        d = np.array(self.matrix, dtype=float)
        if d.ndim != 2 or d.size == 0:
            raise InputError("distortion matrix must be a nonempty 2-D array")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise InputError("distortion entries must be finite and nonnegative")
        L, K = d.shape
        if self.kind not in ("general", "difference", "hamming"):
            raise InputError(f"unknown distortion kind {self.kind!r}")
        if self.kind in ("difference", "hamming"):
            if L != K:
                raise InputError(f"{self.kind} distortion needs a square matrix, got {L}x{K}")
            profile = d[:, 0]
            idx = (np.arange(L)[:, None] - np.arange(K)[None, :]) % L
            if not np.array_equal(d, profile[idx]):
                raise InputError("matrix is not a modulo-L difference distortion")
        if self.kind == "hamming" and not np.array_equal(d, 1.0 - np.eye(L)):
            raise InputError("hamming distortion must be 0 on the diagonal and 1 elsewhere")
        d.setflags(write=False)
        object.__setattr__(self, "matrix", d)
        object.__setattr__(self, "d_max", float(d.max()))

    @classmethod
    def hamming(cls, size: int) -> "DistortionSpec":
        return cls(1.0 - np.eye(size), kind="hamming")

    @classmethod
    def difference(cls, profile) -> "DistortionSpec":
        """Difference measure from its profile ``d(z)``, z = (x - xh) mod L."""
        profile = np.asarray(profile, dtype=float)
        L = profile.size
        idx = (np.arange(L)[:, None] - np.arange(L)[None, :]) % L
        return cls(profile[idx], kind="difference")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def profile(self) -> np.ndarray:
        """d(z) for difference measures."""
        if self.kind == "general":
            raise InputError("profile is only defined for difference measures")
        return self.matrix[:, 0].copy()

    @property
    def is_integral(self) -> bool:
        return bool(np.all(self.matrix == np.round(self.matrix)))

    def trivial_distortion(self, probs) -> float:
        """Smallest expected distortion of a constant reproduction."""
        return float(np.min(np.asarray(probs) @ self.matrix))

    def minimal_distortion(self, probs) -> float:
        return float(np.asarray(probs) @ self.matrix.min(axis=1))

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind != "hamming":
            out["matrix"] = self.matrix.tolist()
        return out


def entropy(probs) -> float:
    p = np.asarray(probs, dtype=float)
    return float(-xlogy(p, p).sum())


def divergence(q, p) -> float:
    """Relative entropy D(q||p) in nats.

    Accepts sources or plain arrays; ``q`` may have zero entries.
    """
    q = np.asarray(getattr(q, "probs", q), dtype=float)
    p = np.asarray(getattr(p, "probs", p), dtype=float)
    if q.shape != p.shape:
        raise DimensionMismatch(f"alphabet sizes differ: {q.shape} vs {p.shape}")
    with np.errstate(divide="ignore"):
        val = float(np.sum(xlogy(q, q) - xlogy(q, p)))
    return max(val, 0.0)


@dataclass(frozen=True, eq=False)
class TypeAtlas:
    """All types of length-``n`` sequences with their exact log-probabilities.

    ``counts[j]`` holds the letter counts of type j, so the type itself is
    ``counts[j] / n``; ``log_probs[j]`` is the log-probability of its type class.
    """

    n: int
    counts: np.ndarray
    log_probs: np.ndarray

    @property
    def types(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_probs)

    @property
    def entries(self) -> list[tuple[np.ndarray, float]]:
        return list(zip(self.types, self.log_probs.tolist()))

    def __len__(self):
        return len(self.log_probs)


def count_types(n: int, size: int) -> int:
    return math.comb(n + size - 1, size - 1)


def _compositions(n: int, size: int) -> np.ndarray:
    if size == 1:
        return np.array([[n]], dtype=np.int64)
    if size == 2:
        k = np.arange(n, -1, -1, dtype=np.int64)
        return np.column_stack([k, n - k])
    # stars and bars: bar positions -> part sizes
    bars = np.array(list(itertools.combinations(range(n + size - 1), size - 1)), dtype=np.int64)
    edges = np.column_stack([np.full(len(bars), -1), bars, np.full(len(bars), n + size - 1)])
    return np.diff(edges, axis=1) - 1


def enumerate_types(n: int, source, cap: int = DEFAULT_ATLAS_CAP) -> TypeAtlas:
    """Enumerate every type of blocklength ``n`` under ``source``.

    Type-class probabilities n!/prod(k_i!) prod p_i^k_i are computed in log
    space so that n in the tens of thousands does not underflow.
    """
    if n < 1:
        raise InputError("blocklength must be positive")
    p = np.asarray(getattr(source, "probs", source), dtype=float)
    total = count_types(n, p.size)
    if total > cap:
        raise AtlasTooLarge(f"{total} types for n={n}, L={p.size} exceeds cap {cap}")
    counts = _compositions(n, p.size)
    log_probs = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + xlogy(counts, p).sum(axis=1)
    counts.setflags(write=False)
    log_probs.setflags(write=False)
    return TypeAtlas(n=n, counts=counts, log_probs=log_probs)


def parse_problem(doc: dict, kind: str | None = None,
                  strict: bool = False) -> tuple[DiscreteSource, DistortionSpec]:
    """Source and distortion from the JSON document layout

    ``{"probs": [...], "distortion": {"kind": ..., "matrix": [[...]]}}``.
    ``kind`` overrides the document's distortion kind; ``strict`` rejects
    probabilities that do not already sum to one.
    """
    if "probs" not in doc:
        raise InputError("problem document has no 'probs' field")
    source = validate_source(doc["probs"], strict=strict)
    ddoc = doc.get("distortion", {"kind": "hamming"})
    if isinstance(ddoc, str):
        ddoc = {"kind": ddoc}
    doc_kind = ddoc.get("kind", "general")
    kind = kind or doc_kind
    if kind == "hamming":
        dist = DistortionSpec.hamming(source.size)
    elif doc_kind == "hamming" and "matrix" not in ddoc:
        dist = DistortionSpec(DistortionSpec.hamming(source.size).matrix, kind=kind)
    elif "matrix" in ddoc:
        dist = DistortionSpec(np.asarray(ddoc["matrix"], dtype=float), kind=kind)
    elif kind == "difference" and "profile" in ddoc:
        dist = DistortionSpec.difference(ddoc["profile"])
    else:
        raise InputError(f"distortion kind {kind!r} needs a 'matrix'")
    if dist.shape[0] != source.size:
        raise DimensionMismatch(
            f"distortion has {dist.shape[0]} rows but source has {source.size} letters")
    return source, dist


def load_problem(path: str | PathLike, kind: str | None = None, strict: bool = False):
    with open(path) as fh:
        doc = json.load(fh)
    return parse_problem(doc, kind=kind, strict=strict)
