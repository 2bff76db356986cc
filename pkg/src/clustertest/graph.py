"""Immutable sparse multigraphs and the vertex/degree/neighbor query model.

A :class:`Graph` stores its adjacency in CSR form.  Every adjacency entry is a
*slot*; ``deg(v)`` is the number of slots owned by ``v``.  An ordinary edge
``(u, v)`` owns one slot at each endpoint.  A self-loop owns one slot by
default (so padding a vertex with loops raises its degree by one per loop);
loops produced by pairing two half-edges of the same vertex own two.

Algorithms never touch the arrays directly when they are meant to be
sublinear: they go through :class:`GraphOracle`, which charges every access
to a :class:`QueryLedger`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp

FAIL = None
"""Value returned by :meth:`GraphOracle.neighbor` for an out-of-range index."""


class GraphFormatError(ValueError):
    """Raised for malformed edge-list input."""


@dataclass
class QueryLedger:
    vertex_queries: int = 0
    degree_queries: int = 0
    neighbor_queries: int = 0

    @property
    def total(self) -> int:
        return self.vertex_queries + self.degree_queries + self.neighbor_queries

    def charge(self, vertex: int = 0, degree: int = 0, neighbor: int = 0) -> None:
        if vertex < 0 or degree < 0 or neighbor < 0:
            raise ValueError("ledger counters are monotone")
        self.vertex_queries += int(vertex)
        self.degree_queries += int(degree)
        self.neighbor_queries += int(neighbor)

    def merge(self, other: "QueryLedger") -> None:
        """Fold a worker's sub-ledger into this one."""
        self.charge(other.vertex_queries, other.degree_queries, other.neighbor_queries)

    def as_dict(self) -> dict:
        return {**asdict(self), "total": self.total}


class Graph:
    """Undirected multigraph on vertices ``0..n-1``.

    Parameters
    ----------
    n:
        Number of vertices (at least 1).
    edges:
        ``(m, 2)`` integer array; parallel edges and loops are kept.
    loop_slots:
        Optional per-edge slot count for loops (1 or 2).  Ignored for
        non-loop edges.  Defaults to 1 for every loop.
    """

    def __init__(self, n: int, edges, loop_slots=None):
        n = int(n)
        if n <= 0:
            raise GraphFormatError("graph must have at least one vertex")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise GraphFormatError("vertex id out of range")
        m = len(edges)
        is_loop = edges[:, 0] == edges[:, 1]
        if loop_slots is None:
            loop_slots = np.ones(m, dtype=np.int64)
        loop_slots = np.asarray(loop_slots, dtype=np.int64).reshape(m)
        if np.any((loop_slots < 1) | (loop_slots > 2)):
            raise GraphFormatError("loop_slots entries must be 1 or 2")
        loop_slots = np.where(is_loop, loop_slots, 1)

        # Slots are emitted in edge order (u side, then v side) and then
        # stably grouped by owner, so adjacency order is load order.
        per_edge = np.where(is_loop, loop_slots, 2)
        slot_edge = np.repeat(np.arange(m, dtype=np.int64), per_edge)
        first = np.concatenate(([0], np.cumsum(per_edge)[:-1])) if m else np.zeros(0, np.int64)
        second = np.zeros(len(slot_edge), dtype=bool)
        second[first[per_edge == 2] + 1] = True
        u = edges[slot_edge, 0]
        v = edges[slot_edge, 1]
        owner = np.where(second & ~is_loop[slot_edge], v, u)
        target = np.where(second & ~is_loop[slot_edge], u, v)
        order = np.argsort(owner, kind="stable")

        self._n = n
        self._edges = edges
        self._loop_slots = loop_slots
        self._targets = target[order]
        self._slot_edge = slot_edge[order]
        deg = np.bincount(owner, minlength=n).astype(np.int64)
        self._deg = deg
        self._offsets = np.concatenate(([0], np.cumsum(deg))).astype(np.int64)
        for arr in (self._edges, self._loop_slots, self._targets, self._slot_edge, self._deg, self._offsets):
            arr.setflags(write=False)
        self._adj = None

    @classmethod
    def from_pairing(cls, n: int, pairs) -> "Graph":
        """Build from half-edge pairs: a pair ``(v, v)`` becomes a two-slot loop."""
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        return cls(n, pairs, loop_slots=np.full(len(pairs), 2, dtype=np.int64))

    @property
    def n(self) -> int:
        return self._n

    @property
    def m(self) -> int:
        return len(self._edges)

    @property
    def edges(self) -> np.ndarray:
        return self._edges

    @property
    def loop_slots(self) -> np.ndarray:
        return self._loop_slots

    @property
    def deg(self) -> np.ndarray:
        return self._deg

    @property
    def vol(self) -> int:
        return int(self._deg.sum())

    @property
    def offsets(self) -> np.ndarray:
        return self._offsets

    @property
    def targets(self) -> np.ndarray:
        return self._targets

    @property
    def slot_edge(self) -> np.ndarray:
        return self._slot_edge

    def neighbors(self, v: int) -> np.ndarray:
        return self._targets[self._offsets[v] : self._offsets[v + 1]]

    def incident_edges(self, v: int) -> np.ndarray:
        return self._slot_edge[self._offsets[v] : self._offsets[v + 1]]

    def adjacency(self) -> sp.csr_matrix:
        """Sparse ``A`` with ``A[u, v]`` = number of slots of ``u`` pointing at ``v``.

        Row sums equal degrees, so ``M = (I + A D^-1) / 2`` is column stochastic.
        """
        if self._adj is None:
            owner = np.repeat(np.arange(self._n), self._deg)
            data = np.ones(len(owner))
            self._adj = sp.csr_matrix((data, (owner, self._targets)), shape=(self._n, self._n))
            self._adj.sum_duplicates()
        return self._adj

    def check_invariants(self) -> None:
        """Full rescan of the degree/volume/symmetry invariants."""
        owner = np.repeat(np.arange(self._n), self._deg)
        assert self._deg.sum() == len(self._targets)
        assert np.all(np.diff(self._offsets) == self._deg)
        a = self.adjacency()
        assert abs(a - a.T).sum() == 0, "adjacency is not symmetric"
        assert np.array_equal(np.bincount(owner, minlength=self._n), self._deg)

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m}, vol={self.vol})"


def load_graph(source: str) -> Graph:
    """Parse the edge-list text format: header ``n m`` then ``m`` lines ``u v``.

    Lines may be separated by newlines or by ``/``; blank lines and ``#``
    comments are skipped.
    """
    lines = []
    for raw in source.replace("/", "\n").splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines:
        raise GraphFormatError("empty input")
    header = lines[0].split()
    if len(header) != 2:
        raise GraphFormatError(f"bad header {lines[0]!r}")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError as exc:
        raise GraphFormatError(f"bad header {lines[0]!r}") from exc
    if n <= 0:
        raise GraphFormatError("n must be positive")
    if m < 0 or len(lines) - 1 != m:
        raise GraphFormatError(f"header says {m} edges, found {len(lines) - 1}")
    edges = np.empty((m, 2), dtype=np.int64)
    for i, line in enumerate(lines[1:]):
        parts = line.split()
        if len(parts) != 2:
            raise GraphFormatError(f"malformed edge line {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise GraphFormatError(f"malformed edge line {line!r}") from exc
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"vertex out of range in {line!r}")
        edges[i] = (u, v)
    return Graph(n, edges)


def dump_graph(g: Graph) -> str:
    """Inverse of :func:`load_graph`.  A two-slot loop is written as two lines."""
    rows = []
    for (u, v), slots in zip(g.edges.tolist(), g.loop_slots.tolist()):
        rows.extend([f"{u} {v}"] * (slots if u == v else 1))
    return "\n".join([f"{g.n} {len(rows)}", *rows]) + "\n"


def dump_metadata(g: Graph, **extra) -> str:
    return json.dumps({"n": g.n, "m": g.m, **extra}, sort_keys=True)


def _mask(g: Graph, subset: Iterable[int] | np.ndarray | None) -> np.ndarray:
    if subset is None:
        return np.ones(g.n, dtype=bool)
    arr = np.asarray(subset)
    if arr.dtype == bool and arr.shape == (g.n,):
        return arr
    idx = np.asarray(list(subset) if not isinstance(subset, np.ndarray) else subset, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= g.n):
        raise IndexError("vertex out of range")
    mask = np.zeros(g.n, dtype=bool)
    mask[idx] = True
    return mask


def volume(g: Graph, subset) -> int:
    return int(g.deg[_mask(g, subset)].sum())


def cut_size(g: Graph, subset, within=None) -> int:
    """Edges with one endpoint in ``subset`` and the other in ``within \\ subset``."""
    s = _mask(g, subset)
    c = _mask(g, within)
    u, v = g.edges[:, 0], g.edges[:, 1]
    crossing = (s[u] & c[v] & ~s[v]) | (s[v] & c[u] & ~s[u])
    return int(crossing.sum())


def conductance(g: Graph, subset, within=None) -> float:
    """``cut(S, C \\ S) / vol(S)``; ``within=None`` means ``C = V``."""
    vol_s = volume(g, subset)
    if vol_s == 0:
        raise ValueError("conductance of a zero-volume set is undefined")
    return cut_size(g, subset, within) / vol_s


class GraphOracle:
    """Query access to a graph with exact accounting.

    ``neighbor`` uses 1-based slot indices and returns :data:`FAIL` when the
    index exceeds the degree.
    """

    def __init__(self, graph: Graph, rng: np.random.Generator, ledger: QueryLedger | None = None):
        self.graph = graph
        self.rng = rng
        self.ledger = ledger if ledger is not None else QueryLedger()
        self._cum_deg = np.cumsum(graph.deg)
        self._biased: dict[float, np.ndarray] = {}

    def random_vertex(self) -> int:
        self.ledger.charge(vertex=1)
        return int(self.rng.integers(self.graph.n))

    def degree(self, v: int) -> int:
        self.ledger.charge(degree=1)
        return int(self.graph.deg[v])

    def neighbor(self, v: int, i: int):
        self.ledger.charge(neighbor=1)
        if i < 1 or i > self.graph.deg[v]:
            return FAIL
        return int(self.graph.targets[self.graph.offsets[v] + i - 1])

    def _biased_cdf(self, eta: float) -> np.ndarray:
        if eta not in self._biased:
            deg = self.graph.deg.astype(float)
            pattern = np.where(np.arange(self.graph.n) % 2 == 0, 1.0, -1.0)
            mean = (deg * pattern).sum() / deg.sum()
            weights = deg * (1.0 + eta * (pattern - mean) / 2.0)
            self._biased[eta] = np.cumsum(weights / weights.sum())
        return self._biased[eta]

    @staticmethod
    def _check_sampler_args(eta: float, fail_prob: float) -> None:
        if not 0.0 <= eta < 1.0:
            raise ValueError("eta must lie in [0, 1)")
        if not 0.0 <= fail_prob <= 1.0 / 3.0:
            raise ValueError("fail_prob must lie in [0, 1/3]")

    def _draw(self, count: int, eta: float) -> np.ndarray:
        if eta == 0.0:
            r = self.rng.integers(self.graph.vol, size=count)
            return np.searchsorted(self._cum_deg, r, side="right").astype(np.int64)
        idx = np.searchsorted(self._biased_cdf(eta), self.rng.random(count), side="right")
        return np.minimum(idx, self.graph.n - 1).astype(np.int64)

    def sample_degree_proportional(self, eta: float = 0.0, fail_prob: float = 0.0) -> int:
        """Draw ``v`` with ``|P(v) - deg(v)/vol| <= eta * deg(v)/vol``.

        ``eta = 0`` is exact.  ``eta > 0`` injects a fixed parity-pattern bias of
        at most that size.  ``fail_prob`` simulates the sampler's "Fail"
        outcome; failures are retried.  Each attempt is charged one vertex
        and one degree query.
        """
        return int(self.sample_many(1, eta, fail_prob)[0])

    def sample_many(self, count: int, eta: float = 0.0, fail_prob: float = 0.0) -> np.ndarray:
        """``count`` independent draws of :meth:`sample_degree_proportional`."""
        self._check_sampler_args(eta, fail_prob)
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            need = count - filled
            self.ledger.charge(vertex=need, degree=need)
            ok = need if not fail_prob else int((self.rng.random(need) >= fail_prob).sum())
            out[filled : filled + ok] = self._draw(ok, eta)
            filled += ok
        return out
