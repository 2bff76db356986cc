"""Reductions from NoisyParities to partition testing and to MAX-CUT.

Vertex ``(v, b)`` of the doubled graph is encoded as ``2v + b``.  An edge
``(u, v)`` with label ``y`` becomes ``(u^0, v^y)`` and ``(u^1, v^(1-y))``, so
slot ``i`` of ``v^b`` is the image of slot ``i`` of ``v`` and one source
query answers one reduced query.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .generators import NoisyParitiesInstance, _all_masks
from .graph import FAIL, Graph, QueryLedger, conductance

MAXCUT_LIMIT = 24


@dataclass(frozen=True)
class ReducedGraph:
    graph: Graph
    source_edge: np.ndarray  # reduced edge -> source edge index
    label: np.ndarray  # reduced edge -> label of its source edge

    def provenance(self) -> list[dict]:
        return [
            {"edge": i, "source_edge": int(e), "label": int(y)}
            for i, (e, y) in enumerate(zip(self.source_edge.tolist(), self.label.tolist()))
        ]


def encode(v, b):
    return 2 * np.asarray(v) + np.asarray(b)


def decode(x):
    x = np.asarray(x)
    return x // 2, x % 2


def reduce_to_partition_testing(inst: NoisyParitiesInstance) -> ReducedGraph:
    """Eager doubled graph: label 0 keeps sides, label 1 swaps them.

    A loop with label 1 becomes parallel edges between ``v^0`` and ``v^1``;
    a one-slot loop with label 1 becomes a single edge so degrees stay equal.
    """
    g = inst.graph
    y = np.asarray(inst.Y, dtype=np.int64)
    if len(y) != g.m:
        raise ValueError("label vector length must equal the number of edges")
    u, v = g.edges[:, 0], g.edges[:, 1]
    first = np.stack([encode(u, 0), encode(v, y)], axis=1)
    second = np.stack([encode(u, 1), encode(v, 1 - y)], axis=1)
    slots = np.where(u == v, g.loop_slots, 1)
    keep_second = ~((u == v) & (slots == 1) & (y == 1))
    edges = np.stack([first, second], axis=1).reshape(-1, 2)
    loop_slots = np.repeat(slots, 2)
    src = np.repeat(np.arange(g.m), 2)
    mask = np.stack([np.ones(g.m, dtype=bool), keep_second], axis=1).reshape(-1)
    reduced = Graph(2 * g.n, edges[mask], loop_slots[mask])
    return ReducedGraph(reduced, src[mask], y[src[mask]])


class LazyReducedOracle:
    """Query access to the doubled graph, forwarding each query to the source.

    Each reduced degree or neighbour query costs exactly one source query of
    the same kind, charged to the shared ledger.
    """

    def __init__(self, inst: NoisyParitiesInstance, rng: np.random.Generator, ledger: QueryLedger | None = None):
        self.inst = inst
        self.rng = rng
        self.ledger = ledger if ledger is not None else QueryLedger()

    def random_vertex(self) -> int:
        self.ledger.charge(vertex=1)
        return int(self.rng.integers(2 * self.inst.graph.n))

    def degree(self, x: int) -> int:
        self.ledger.charge(degree=1)
        return int(self.inst.graph.deg[x // 2])

    def neighbor(self, x: int, i: int):
        self.ledger.charge(neighbor=1)
        g = self.inst.graph
        v, b = divmod(x, 2)
        if i < 1 or i > g.deg[v]:
            return FAIL
        slot = g.offsets[v] + i - 1
        return int(2 * g.targets[slot] + (b ^ int(self.inst.Y[g.slot_edge[slot]])))


def vstar_cut(inst: NoisyParitiesInstance) -> np.ndarray:
    """``{v^0 : X(v)=0} U {v^1 : X(v)=1}`` as reduced vertex ids."""
    if inst.X is None:
        raise ValueError("instance carries no hidden X (YES case)")
    return encode(np.arange(inst.graph.n), np.asarray(inst.X, dtype=np.int64))


def vstar_expansion(inst: NoisyParitiesInstance, reduced: ReducedGraph | None = None) -> float:
    reduced = reduced or reduce_to_partition_testing(inst)
    return conductance(reduced.graph, vstar_cut(inst))


def reduce_to_maxcut(inst: NoisyParitiesInstance) -> Graph:
    """Subgraph of label-1 edges on the original vertex set."""
    keep = np.asarray(inst.Y) == 1
    g = inst.graph
    return Graph(g.n, g.edges[keep], g.loop_slots[keep])


def cut_value(g: Graph, side) -> int:
    """Edges with endpoints on different sides; loops never count."""
    side = np.asarray(side, dtype=bool)
    u, v = g.edges[:, 0], g.edges[:, 1]
    return int(np.count_nonzero(side[u] != side[v]))


def maxcut_bruteforce(g: Graph) -> int:
    """Exact maximum cut over all ``2^(n-1)`` bipartitions (``n <= 24``).

    ``cut(x) = x.deg - x^T A x`` over the loop-free adjacency, evaluated as
    an outer table over the two halves of the vertex set.
    """
    n = g.n
    if n > MAXCUT_LIMIT:
        raise ValueError(f"brute-force maxcut refused for n={n} > {MAXCUT_LIMIT}")
    u, v = g.edges[:, 0], g.edges[:, 1]
    proper = u != v
    if n == 1 or not proper.any():
        return 0
    adj = np.zeros((n, n))
    np.add.at(adj, (u[proper], v[proper]), 1.0)
    adj = adj + adj.T
    deg = adj.sum(axis=1)
    h = n // 2
    left, right = np.arange(h), np.arange(h, n)
    bl = _all_masks(h)
    br = np.concatenate([_all_masks(n - h - 1), np.zeros((1 << (n - h - 1), 1))], axis=1)
    lin_l = bl @ deg[left] - np.einsum("ij,jk,ik->i", bl, adj[np.ix_(left, left)], bl)
    lin_r = br @ deg[right] - np.einsum("ij,jk,ik->i", br, adj[np.ix_(right, right)], br)
    cross = bl @ adj[np.ix_(left, right)]
    best = 0.0
    for start in range(0, len(bl), 512):
        block = lin_l[start : start + 512, None] + lin_r[None, :] - 2.0 * (cross[start : start + 512] @ br.T)
        best = max(best, float(block.max()))
    return int(round(best))
