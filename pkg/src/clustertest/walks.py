"""Lazy random walks and the collision statistics built on them.

Walks are simulated in batches: all walks of one batch advance together,
one lazy coin and one uniform adjacency slot per walk per step.  The walks
of every source in a call share one vectorized pass; each walk consumes its
own coins, so walks are mutually independent and a call is reproducible
from its stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph, QueryLedger
from .rng import as_generator, split


class ConfigurationError(ValueError):
    """Parameters that violate a walk-count precondition."""


@dataclass(frozen=True)
class WalkConfig:
    t: int
    R: int
    rng_seed: int = 0

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("t must be non-negative")
        if self.R < 1:
            raise ValueError("R must be at least 1")


@dataclass
class EndpointDistribution:
    source: int
    counts: dict[int, int]
    R: int

    def q(self, b: int) -> float:
        return self.counts.get(b, 0) / self.R

    def as_vector(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for b, c in self.counts.items():
            out[b] = c / self.R
        return out


@dataclass(frozen=True)
class NormTestResult:
    accept: bool
    statistic: float
    threshold: float


def walk_endpoints(
    g: Graph, starts, t: int, rng: np.random.Generator, ledger: QueryLedger | None = None
) -> np.ndarray:
    """Endpoints of independent ``t``-step lazy walks, one per entry of ``starts``."""
    pos = np.array(starts, dtype=np.int64, copy=True).reshape(-1)
    deg, offsets, targets = g.deg, g.offsets, g.targets
    for _ in range(t):
        movers = np.flatnonzero(rng.random(len(pos)) < 0.5)
        if movers.size == 0:
            continue
        here = pos[movers]
        slot = rng.integers(0, deg[here])
        pos[movers] = targets[offsets[here] + slot]
        if ledger is not None:
            ledger.charge(degree=movers.size, neighbor=movers.size)
    return pos


def run_walk(g: Graph, start: int, t: int, rng: np.random.Generator, ledger: QueryLedger | None = None) -> int:
    return int(walk_endpoints(g, [start], t, rng, ledger)[0])


def empirical_endpoint_distribution(
    g: Graph, a: int, t: int, R: int, rng: np.random.Generator, ledger: QueryLedger | None = None
) -> EndpointDistribution:
    if R < 1:
        raise ValueError("R must be at least 1")
    ends = walk_endpoints(g, np.full(R, a), t, rng, ledger)
    vertices, counts = np.unique(ends, return_counts=True)
    return EndpointDistribution(a, dict(zip(vertices.tolist(), counts.tolist())), R)


def collision_statistic(g: Graph, ends_1: np.ndarray, ends_2: np.ndarray) -> float:
    """``(1/R^2) sum_i c1(i) c2(i) / deg(i)`` for two equally sized batches."""
    R = len(ends_1)
    c1 = np.bincount(ends_1, minlength=g.n)
    c2 = np.bincount(ends_2, minlength=g.n)
    return float((c1 * c2 / g.deg).sum() / (R * R))


def l2_norm_test(
    g: Graph,
    a: int,
    sigma: float,
    R: int,
    t: int,
    rng,
    delta: float | None = None,
    ledger: QueryLedger | None = None,
) -> NormTestResult:
    """Decide ``||D^{-1/2} p_a^t||^2 <= sigma/4`` (accept) versus ``> sigma`` (reject).

    Runs two batches of ``R`` walks and rejects iff their cross-collision
    statistic exceeds ``sigma/2``.  Requires ``R >= 16 sqrt(vol) / delta``;
    without ``delta`` the weakest meaningful budget ``delta = 1`` is checked.
    """
    bound = 16.0 * math.sqrt(g.vol) / (1.0 if delta is None else delta)
    if R < bound:
        raise ConfigurationError(f"R={R} is below 16*sqrt(vol)/delta = {bound:.1f}")
    first, second = split(rng, 2)
    ends_1 = walk_endpoints(g, np.full(R, a), t, first, ledger)
    ends_2 = walk_endpoints(g, np.full(R, a), t, second, ledger)
    z = collision_statistic(g, ends_1, ends_2)
    return NormTestResult(accept=z <= sigma / 2.0, statistic=z, threshold=sigma / 2.0)


def l2_norm_tests(
    g: Graph,
    sources,
    sigma: float,
    R: int,
    t: int,
    rng,
    delta: float | None = None,
    ledger: QueryLedger | None = None,
) -> np.ndarray:
    """``l2_norm_test`` for every source at once; returns the statistics ``Z``."""
    bound = 16.0 * math.sqrt(g.vol) / (1.0 if delta is None else delta)
    if R < bound:
        raise ConfigurationError(f"R={R} is below 16*sqrt(vol)/delta = {bound:.1f}")
    sources = np.asarray(sources, dtype=np.int64)
    s = len(sources)
    ends = walk_endpoints(g, np.repeat(np.tile(sources, 2), R), t, as_generator(rng), ledger)
    c1 = _count_matrix(g.n, ends[: s * R], s, R)
    c2 = _count_matrix(g.n, ends[s * R :], s, R)
    return np.asarray(c1.multiply(sp.diags(1.0 / g.deg) @ c2).sum(axis=0)).ravel() / (R * R)


def _count_matrix(n: int, ends: np.ndarray, s: int, R: int) -> sp.csc_matrix:
    cols = np.repeat(np.arange(s), R)
    return sp.csc_matrix((np.ones(len(ends)), (ends, cols)), shape=(n, s))


def endpoint_counts(
    g: Graph, sources, t: int, R: int, rng, ledger: QueryLedger | None = None
) -> sp.csc_matrix:
    """Sparse ``n x s`` matrix of endpoint counts, one batch of ``R`` walks per source."""
    sources = np.asarray(sources, dtype=np.int64)
    if len(sources) == 0:
        return sp.csc_matrix((g.n, 0))
    ends = walk_endpoints(g, np.repeat(sources, R), t, as_generator(rng), ledger)
    return _count_matrix(g.n, ends, len(sources), R)


def gram_from_counts(g: Graph, counts: sp.spmatrix, R: int, unbiased_diagonal: bool = True) -> np.ndarray:
    """``Q^T Q`` with ``Q = D^{-1/2} counts / R``.

    Off-diagonal entries combine independent batches and are unbiased.  The
    diagonal reuses one batch, so by default it keeps only pairs of distinct
    walks, ``sum_i c(i)(c(i)-1)/deg(i) / (R(R-1))``, which is unbiased too.
    """
    scaled = sp.diags(1.0 / g.deg) @ counts
    out = np.asarray((counts.T @ scaled).todense()) / (R * R)
    if unbiased_diagonal and R > 1:
        self_hits = np.asarray(scaled.sum(axis=0)).ravel()
        diag = (np.diag(out) * R * R - self_hits) / (R * (R - 1))
        np.fill_diagonal(out, diag)
    return 0.5 * (out + out.T)


def estimate_gram(
    g: Graph,
    sources,
    t: int,
    R: int,
    rng,
    ledger: QueryLedger | None = None,
    unbiased_diagonal: bool = True,
) -> np.ndarray:
    """Monte-Carlo estimate of the walk Gram matrix for an ordered source multiset."""
    if R < 1:
        raise ValueError("R must be at least 1")
    counts = endpoint_counts(g, sources, t, R, rng, ledger)
    return gram_from_counts(g, counts, R, unbiased_diagonal)
