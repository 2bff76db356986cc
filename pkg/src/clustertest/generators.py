"""Instance generators: configuration-model graphs, planted cluster
structures, NoisyParities instances, and self-loop degree padding."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .graph import Graph, conductance, volume
from .spectral import laplacian_spectrum

EXACT_CONDUCTANCE_LIMIT = 24


class InfeasibleInstanceError(ValueError):
    pass


@dataclass(frozen=True)
class InstanceSpec:
    kind: str  # clusterable | unclusterable | regular | noisy_parities
    n: int  # vertices per cluster for the cluster kinds, total otherwise
    d: int
    k: int = 1
    phi_out: float = 0.0
    eps: float = 0.0
    case: str = "no"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in {"clusterable", "unclusterable", "regular", "noisy_parities"}:
            raise ValueError(f"unknown instance kind {self.kind!r}")
        if (self.n * self.d) % 2:
            raise ValueError("n*d must be even")


@dataclass
class PlantedInstance:
    """A generated graph together with its planted partition and measurements."""

    graph: Graph
    labels: np.ndarray
    phi_in: float
    certificate: str
    internal: list[float]
    external: list[float]
    beta: float
    cross_edges: int = 0

    @property
    def clusters(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in range(int(self.labels.max()) + 1)]

    def ground_truth(self) -> dict:
        return {
            "labels": self.labels.tolist(),
            "phi_in_certified": self.phi_in,
            "certificate": self.certificate,
            "internal_conductance": self.internal,
            "external_conductance": self.external,
            "beta": self.beta,
            "cross_edges": self.cross_edges,
        }


@dataclass
class NoisyParitiesInstance:
    graph: Graph
    case: str
    Y: np.ndarray
    eps: float
    d: int
    X: np.ndarray | None = None
    Z: np.ndarray | None = None
    seed: int | None = field(default=None)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.graph.n,
                "d": self.d,
                "eps": self.eps,
                "case": self.case,
                "seed": self.seed,
                "edges": self.graph.edges.tolist(),
                "loop_slots": self.graph.loop_slots.tolist(),
                "Y": self.Y.tolist(),
                "X": None if self.X is None else self.X.tolist(),
                "Z": None if self.Z is None else self.Z.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "NoisyParitiesInstance":
        obj = json.loads(text)
        g = Graph(obj["n"], np.array(obj["edges"], dtype=np.int64).reshape(-1, 2), obj["loop_slots"])
        as_arr = lambda key: None if obj.get(key) is None else np.array(obj[key], dtype=np.int8)
        return cls(graph=g, case=obj["case"], Y=as_arr("Y"), eps=obj["eps"], d=obj["d"], X=as_arr("X"), Z=as_arr("Z"), seed=obj.get("seed"))


def config_model_pairs(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform perfect matching of the ``n*d`` half-edges, as vertex pairs."""
    if d < 1:
        raise ValueError("d must be at least 1")
    if (n * d) % 2:
        raise ValueError("n*d must be even")
    stubs = rng.permutation(np.repeat(np.arange(n, dtype=np.int64), d))
    return stubs.reshape(-1, 2)


def gen_config_model(n: int, d: int, seed: int) -> Graph:
    """Random ``d``-regular multigraph; loops and parallel edges are kept."""
    return Graph.from_pairing(n, config_model_pairs(n, d, rngmod.stream(seed, "config_model", n, d)))


def add_self_loops_to_degree(g: Graph, d: int) -> Graph:
    """Pad every vertex to degree ``d`` with one-slot self-loops."""
    deficit = d - g.deg
    if np.any(deficit < 0):
        raise ValueError(f"a vertex already exceeds degree {d}")
    if not deficit.any():
        return g
    loops = np.repeat(np.arange(g.n, dtype=np.int64), deficit)
    edges = np.concatenate([g.edges, np.stack([loops, loops], axis=1)])
    slots = np.concatenate([g.loop_slots, np.ones(len(loops), dtype=np.int64)])
    return Graph(g.n, edges, slots)


# -- conductance certification ------------------------------------------------


def exact_internal_conductance(g: Graph, members) -> float:
    """Minimum of ``cut(S, C \\ S) / vol(S)`` over ``S`` with ``vol(S) <= vol(C)/2``.

    Exhaustive over the ``2^(|C|-1)`` bipartitions; refuses clusters larger
    than :data:`EXACT_CONDUCTANCE_LIMIT`.
    """
    members = np.asarray(members, dtype=np.int64)
    c = len(members)
    if c > EXACT_CONDUCTANCE_LIMIT:
        raise ValueError(f"exhaustive conductance refused for |C|={c}")
    if c <= 1:
        return 1.0
    local = -np.ones(g.n, dtype=np.int64)
    local[members] = np.arange(c)
    e = g.edges
    inside = (local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0) & (e[:, 0] != e[:, 1])
    adj = np.zeros((c, c))
    np.add.at(adj, (local[e[inside, 0]], local[e[inside, 1]]), 1.0)
    adj = adj + adj.T
    deg_in = adj.sum(axis=1)
    deg = g.deg[members].astype(float)
    vol_c = deg.sum()
    # cut(b) = b.deg_in - b^T A b.  Split vertices into halves L | R and
    # evaluate every (b_L, b_R) combination as an outer table.  The last
    # vertex is pinned to the complement so each bipartition appears once.
    h = (c - 1) // 2 + (c - 1) % 2
    left, right = np.arange(h), np.arange(h, c)
    bl = _all_masks(len(left))
    br = _all_masks(len(right) - 1)
    br = np.concatenate([br, np.zeros((len(br), 1))], axis=1)
    lin_l = bl @ deg_in[left] - np.einsum("ij,jk,ik->i", bl, adj[np.ix_(left, left)], bl)
    lin_r = br @ deg_in[right] - np.einsum("ij,jk,ik->i", br, adj[np.ix_(right, right)], br)
    bilinear = bl @ adj[np.ix_(left, right)] @ br.T
    cut = lin_l[:, None] + lin_r[None, :] - 2.0 * bilinear
    vol_s = (bl @ deg[left])[:, None] + (br @ deg[right])[None, :]
    small = np.minimum(vol_s, vol_c - vol_s)
    ok = small > 0
    best = float((cut[ok] / small[ok]).min())
    return float(best)


def _all_masks(bits: int) -> np.ndarray:
    masks = np.arange(1 << bits, dtype=np.int64)
    return ((masks[:, None] >> np.arange(bits)[None, :]) & 1).astype(float)


def padded_cluster_graph(g: Graph, members) -> Graph:
    """Induced subgraph on ``members``, padded with loops back to the degrees in ``g``.

    Conductance of ``S`` inside the padded graph equals the conductance of
    ``S`` within the cluster in ``g``.
    """
    members = np.asarray(members, dtype=np.int64)
    local = -np.ones(g.n, dtype=np.int64)
    local[members] = np.arange(len(members))
    e = g.edges
    keep = (local[e[:, 0]] >= 0) & (local[e[:, 1]] >= 0)
    sub = Graph(len(members), local[e[keep]], g.loop_slots[keep])
    return _pad_to(sub, g.deg[members])


def _pad_to(sub: Graph, target_deg: np.ndarray) -> Graph:
    deficit = target_deg - sub.deg
    loops = np.repeat(np.arange(sub.n, dtype=np.int64), deficit)
    edges = np.concatenate([sub.edges, np.stack([loops, loops], axis=1)])
    slots = np.concatenate([sub.loop_slots, np.ones(len(loops), dtype=np.int64)])
    return Graph(sub.n, edges, slots)


def cheeger_lower_bound(g: Graph, members) -> float:
    """``lambda_2 / 2`` of the padded cluster graph, a lower bound on its conductance."""
    members = np.asarray(members)
    if len(members) <= 1:
        return 1.0
    lam = laplacian_spectrum(padded_cluster_graph(g, members), 2)
    return float(max(lam[1], 0.0) / 2.0)


def certify_internal_conductance(g: Graph, members, exact_limit: int = EXACT_CONDUCTANCE_LIMIT) -> tuple[float, str]:
    if len(members) <= exact_limit:
        return exact_internal_conductance(g, members), "exact"
    return cheeger_lower_bound(g, members), "cheeger"


# -- planted structures ---------------------------------------------------------


def _clustered_pairs(num_clusters: int, n_per_cluster: int, d: int, seed: int, tag: str) -> list[np.ndarray]:
    if (n_per_cluster * d) % 2:
        raise ValueError("n_per_cluster*d must be even")
    return [
        config_model_pairs(n_per_cluster, d, rngmod.stream(seed, tag, "cluster", c)) + c * n_per_cluster
        for c in range(num_clusters)
    ]


def _swap_cross_edges(blocks: list[np.ndarray], budget: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Degree-preserving double swaps between neighbouring clusters on a ring.

    ``(a, b)`` in cluster ``i`` and ``(c, e)`` in cluster ``j`` become
    ``(a, c)`` and ``(b, e)``; each swap adds two cut edges to both clusters.
    ``budget`` bounds the cut edges any single cluster may receive.
    """
    h = len(blocks)
    blocks = [b.copy() for b in blocks]
    if h < 2 or budget < 2:
        return np.concatenate(blocks), 0
    links = [(0, 1)] if h == 2 else [(i, (i + 1) % h) for i in range(h)]
    per_link = budget // 2 if h == 2 else budget // 4
    if per_link == 0:
        return np.concatenate(blocks), 0
    order = [rng.permutation(len(b)) for b in blocks]
    used = [0] * h
    cross = []
    for i, j in links:
        take_i = order[i][used[i] : used[i] + per_link]
        take_j = order[j][used[j] : used[j] + per_link]
        if len(take_i) < per_link or len(take_j) < per_link:
            raise InfeasibleInstanceError("not enough edges to place the requested cross edges")
        used[i] += per_link
        used[j] += per_link
        ei, ej = blocks[i][take_i], blocks[j][take_j]
        cross.append(np.stack([ei[:, 0], ej[:, 0]], axis=1))
        cross.append(np.stack([ei[:, 1], ej[:, 1]], axis=1))
    keep = [np.delete(blocks[c], order[c][: used[c]], axis=0) for c in range(h)]
    pairs = np.concatenate(keep + cross)
    return pairs, sum(len(x) for x in cross)


def _measure(g: Graph, labels: np.ndarray, exact_limit: int) -> tuple[list[float], list[float], float, str, float]:
    clusters = [np.flatnonzero(labels == c) for c in range(int(labels.max()) + 1)]
    internal, methods, external = [], set(), []
    for members in clusters:
        value, method = certify_internal_conductance(g, members, exact_limit)
        internal.append(value)
        methods.add(method)
        external.append(conductance(g, members))
    vol = g.vol
    beta = min(volume(g, m) for m in clusters) * len(clusters) / vol
    certificate = methods.pop() if len(methods) == 1 else "mixed"
    return internal, external, min(internal), certificate, beta


def gen_clusterable(
    k: int,
    n_per_cluster: int,
    d: int,
    seed: int,
    bridge_phi_out: float | None = None,
    exact_limit: int = EXACT_CONDUCTANCE_LIMIT,
) -> PlantedInstance:
    """Disjoint union of ``k`` configuration-model clusters, certified.

    ``phi_in`` on the result is a proven lower bound on every cluster's
    internal conductance (exact for small clusters, Cheeger otherwise).
    With ``bridge_phi_out`` cross edges are added by degree-preserving swaps
    so that each cluster's external conductance is at most that value.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    blocks = _clustered_pairs(k, n_per_cluster, d, seed, "clusterable")
    cross = 0
    if bridge_phi_out:
        budget = int(np.floor(bridge_phi_out * n_per_cluster * d))
        pairs, cross = _swap_cross_edges(blocks, budget, rngmod.stream(seed, "clusterable", "bridge"))
    else:
        pairs = np.concatenate(blocks)
    g = Graph.from_pairing(k * n_per_cluster, pairs)
    labels = np.repeat(np.arange(k), n_per_cluster)
    internal, external, phi, cert, beta = _measure(g, labels, exact_limit)
    return PlantedInstance(g, labels, phi, cert, internal, external, beta, cross)


def gen_unclusterable(
    k: int,
    n_per_cluster: int,
    d: int,
    phi_out: float,
    seed: int,
    require_cross_edges: bool = False,
    exact_limit: int = EXACT_CONDUCTANCE_LIMIT,
) -> PlantedInstance:
    """``k+1`` planted clusters with external conductance at most ``phi_out``.

    When ``phi_out`` is too small to afford a single swap the clusters are
    left disconnected (external conductance 0), unless
    ``require_cross_edges`` asks for an error instead.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    if not 0.0 < phi_out < 1.0:
        raise ValueError("phi_out must lie in (0, 1)")
    h = k + 1
    blocks = _clustered_pairs(h, n_per_cluster, d, seed, "unclusterable")
    budget = int(np.floor(phi_out * n_per_cluster * d))
    pairs, cross = _swap_cross_edges(blocks, budget, rngmod.stream(seed, "unclusterable", "swap"))
    if require_cross_edges and cross == 0 and h > 1:
        raise InfeasibleInstanceError(f"phi_out={phi_out} cannot afford any cross edge at this size")
    g = Graph.from_pairing(h * n_per_cluster, pairs)
    labels = np.repeat(np.arange(h), n_per_cluster)
    internal, external, phi, cert, beta = _measure(g, labels, exact_limit)
    return PlantedInstance(g, labels, phi, cert, internal, external, beta, cross)


def gen_noisy_parities(n: int, d: int, eps: float, case: str, seed: int) -> NoisyParitiesInstance:
    """NoisyParities instance over a configuration-model graph.

    ``case`` is ``"yes"``, ``"no"`` or ``"random"`` (fair coin).  Each edge
    object, loops included, carries one label.
    """
    if not 0.0 <= eps <= 0.5:
        raise ValueError("eps must lie in [0, 1/2]")
    rng = rngmod.stream(seed, "noisy_parities")
    if case == "random":
        case = "yes" if rng.random() < 0.5 else "no"
    if case not in {"yes", "no"}:
        raise ValueError(f"unknown case {case!r}")
    g = Graph.from_pairing(n, config_model_pairs(n, d, rngmod.stream(seed, "noisy_parities", "graph")))
    u, v = g.edges[:, 0], g.edges[:, 1]
    if case == "yes":
        y = rng.integers(0, 2, size=g.m).astype(np.int8)
        return NoisyParitiesInstance(g, case, y, eps, d, seed=seed)
    x = rng.integers(0, 2, size=n).astype(np.int8)
    z = (rng.random(g.m) < eps).astype(np.int8)
    y = (x[u] ^ x[v] ^ z).astype(np.int8)
    return NoisyParitiesInstance(g, case, y, eps, d, X=x, Z=z, seed=seed)
