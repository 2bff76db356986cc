"""A playable NoisyParities adversary and a cycle-sum distinguisher.

The adversary builds a random ``d``-regular multigraph lazily: when a vertex
is queried each of its unpaired half-edges is paired with a uniformly random
unpaired half-edge (its own included, which yields a loop).  In the YES case
labels are uniform.  In the NO case each new edge draws noise ``Z`` and, if
it closes a cycle in the spanning forest ``F`` of the discovered graph, its
label is forced to ``Z(e) + sum_{P} (Y + Z)`` over the forest path ``P``.
Forest paths are never walked: a union-find with parities stores the
potential ``sum (Y + Z)`` from each vertex to its root.

With ``closure=True`` the session also reproduces the closure bookkeeping:
once a non-forest edge appears, the ball of radius ``b ln n`` around the
queried vertex is revealed, and an error is raised (terminally) whenever two
non-forest endpoints are within ``b ln n`` of each other in ``F`` or the
ball itself contains a non-forest edge.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .rng import as_generator, stream


class SessionError(ValueError):
    """Misuse of a session (re-query, bad vertex)."""


@dataclass(frozen=True)
class QueryResponse:
    edges: list  # (neighbor, edge_id, label) per slot of the queried vertex
    err: bool = False
    revealed: list = field(default_factory=list)  # (u, v, edge_id, label) found by closure


@dataclass
class EdgeRecord:
    u: int
    v: int
    label: int
    noise: int  # -1 in the YES case
    forest: bool


class InteractionSession:
    def __init__(self, n: int, d: int, eps: float, case: str = "random", seed: int = 0, closure: bool = False):
        if d < 3:
            raise ValueError("d must be at least 3")
        if (n * d) % 2:
            raise ValueError("n * d must be even")
        if n < 2:
            raise ValueError("n must be at least 2")
        if not 0.0 <= eps <= 0.5:
            raise ValueError("eps must lie in [0, 1/2]")
        self.n, self.d, self.eps, self.seed = n, d, eps, seed
        self._rng = stream(seed, "interaction")
        if case == "random":
            case = "yes" if self._rng.random() < 0.5 else "no"
        if case not in ("yes", "no"):
            raise ValueError(f"unknown case {case!r}")
        self.case = case
        self.closure_enabled = closure
        self.b = 1.0 / (8.0 * math.log(d))
        self.radius = self.b * math.log(n)

        stubs = n * d
        self._free = np.arange(stubs, dtype=np.int64)
        self._where = np.arange(stubs, dtype=np.int64)
        self._num_free = stubs
        self.mate = np.full(stubs, -1, dtype=np.int64)
        self.stub_edge = np.full(stubs, -1, dtype=np.int64)

        self._parent = np.arange(n, dtype=np.int64)
        self._parity = np.zeros(n, dtype=np.int8)
        self.forest_adj: dict[int, list[int]] = {}
        self.Q: set[int] = set()
        self.H: list[EdgeRecord] = []
        self.R_set: list[int] = []
        self.err_flag = False
        self.query_count = 0

    # -- half-edge pool --------------------------------------------------------

    def _take(self, h: int) -> None:
        i = self._where[h]
        last = self._free[self._num_free - 1]
        self._free[i] = last
        self._where[last] = i
        self._num_free -= 1

    def _pair(self, h: int) -> int:
        self._take(h)
        j = int(self._rng.integers(self._num_free))
        other = int(self._free[j])
        self._take(other)
        self.mate[h] = other
        self.mate[other] = h
        return other

    # -- union-find with parity -------------------------------------------------

    def _find(self, v: int) -> tuple[int, int]:
        path = []
        while self._parent[v] != v:
            path.append(v)
            v = int(self._parent[v])
        root, acc = v, 0
        for x in reversed(path):
            acc ^= int(self._parity[x])
            self._parity[x] = acc
            self._parent[x] = root
        return root, (int(self._parity[path[0]]) if path else 0)

    def potential(self, v: int) -> int:
        """Parity of ``sum (Y + Z)`` along the forest path from ``v`` to its root."""
        return self._find(v)[1]

    def same_tree(self, u: int, v: int) -> bool:
        return self._find(u)[0] == self._find(v)[0]

    # -- edges -------------------------------------------------------------------

    def _new_edge(self, h: int, other: int) -> int:
        u, v = h // self.d, other // self.d
        ru, pu = self._find(u)
        rv, pv = self._find(v)
        acyclic = ru != rv
        noise = -1
        if self.case == "yes":
            label = int(self._rng.integers(2))
        else:
            noise = int(self._rng.random() < self.eps)
            label = int(self._rng.integers(2)) if acyclic else noise ^ pu ^ pv
        if acyclic:
            self._parent[ru] = rv
            self._parity[ru] = pu ^ pv ^ label ^ (0 if noise < 0 else noise)
            self.forest_adj.setdefault(u, []).append(v)
            self.forest_adj.setdefault(v, []).append(u)
        eid = len(self.H)
        self.H.append(EdgeRecord(u, v, label, noise, acyclic))
        self.stub_edge[h] = self.stub_edge[other] = eid
        if not acyclic:
            self.R_set.append(eid)
        return eid

    def _reveal(self, v: int) -> list[int]:
        """Pair every free half-edge of ``v``; return ids of the new edges."""
        fresh = []
        for i in range(self.d):
            h = v * self.d + i
            if self.mate[h] < 0:
                fresh.append(self._new_edge(h, self._pair(h)))
        return fresh

    # -- closure bookkeeping ----------------------------------------------------

    def forest_distances(self, source: int, limit: float) -> dict[int, int]:
        """BFS distances in ``F`` from ``source`` up to ``limit``."""
        dist = {source: 0}
        frontier = deque([source])
        while frontier:
            x = frontier.popleft()
            if dist[x] + 1 > limit:
                continue
            for y in self.forest_adj.get(x, ()):
                if y not in dist:
                    dist[y] = dist[x] + 1
                    frontier.append(y)
        return dist

    def _closure_violated(self) -> bool:
        endpoints = []
        for eid in self.R_set:
            e = self.H[eid]
            endpoints.extend([(e.u, eid), (e.v, eid)])
        for i, (x, ex) in enumerate(endpoints):
            near = self.forest_distances(x, self.radius)
            for y, ey in endpoints[i + 1 :]:
                if y in near:
                    return True
        return False

    def _generate_ball(self, q: int) -> list[int]:
        """Reveal everything within ``b ln n`` of ``q``; returns new edge ids."""
        fresh = []
        dist = {q: 0}
        frontier = deque([q])
        while frontier:
            x = frontier.popleft()
            if dist[x] + 1 > self.radius:
                continue
            fresh.extend(self._reveal(x))
            for i in range(self.d):
                y = int(self.mate[x * self.d + i]) // self.d
                if y not in dist:
                    dist[y] = dist[x] + 1
                    frontier.append(y)
        return fresh

    # -- the query ---------------------------------------------------------------

    def query(self, q: int) -> QueryResponse:
        if not 0 <= q < self.n:
            raise SessionError(f"vertex {q} out of range")
        if self.err_flag:
            return QueryResponse(edges=[], err=True)
        if q in self.Q:
            raise SessionError(f"vertex {q} was already queried")
        self.Q.add(q)
        self.query_count += 1
        before = len(self.R_set)
        self._reveal(q)
        revealed = []
        if self.closure_enabled and len(self.R_set) > before:
            if self._closure_violated():
                self.err_flag = True
            else:
                start = len(self.R_set)
                ball = self._generate_ball(q)
                if len(self.R_set) > start:
                    self.err_flag = True
                revealed = [(self.H[e].u, self.H[e].v, e, self.H[e].label) for e in ball]
        edges = []
        for i in range(self.d):
            h = q * self.d + i
            eid = int(self.stub_edge[h])
            edges.append((int(self.mate[h]) // self.d, eid, self.H[eid].label))
        return QueryResponse(edges=edges, err=self.err_flag, revealed=revealed)

    # -- inspection --------------------------------------------------------------

    def check_invariants(self) -> None:
        for q in self.Q:
            if np.any(self.mate[q * self.d : (q + 1) * self.d] < 0):
                raise AssertionError(f"queried vertex {q} has an unpaired half-edge")
        touched = {x for e in self.H for x in (e.u, e.v)}
        roots = {self._find(x)[0] for x in touched}
        forest = sum(e.forest for e in self.H)
        if forest != len(touched) - len(roots):
            raise AssertionError("F is not a spanning forest of H")
        if self.case == "no":
            for e in self.H:
                if (e.label ^ e.noise) != (self.potential(e.u) ^ self.potential(e.v)):
                    raise AssertionError("a cycle of H has odd (Y + Z) sum")

    def discovered_graph(self):
        """Edges of ``H`` as an array of ``(u, v)`` plus labels."""
        edges = np.array([(e.u, e.v) for e in self.H], dtype=np.int64).reshape(-1, 2)
        labels = np.array([e.label for e in self.H], dtype=np.int8)
        return edges, labels


def open_session(n: int, d: int, eps: float, case: str = "random", seed: int = 0, closure: bool = False) -> InteractionSession:
    return InteractionSession(n, d, eps, case, seed, closure)


def query_vertex(session: InteractionSession, q: int) -> QueryResponse:
    return session.query(q)


def closure_error_envelope(n: int, d: int, delta: float) -> float:
    """Per-round error bound ``16 d^4 ln^2 n / n^(7/8 - 2 delta)``."""
    return 16.0 * d**4 * math.log(n) ** 2 / n ** (7.0 / 8.0 - 2.0 * delta)


# -- cycle statistics ------------------------------------------------------------


def zero_sum_probability(L: int, eps: float) -> float:
    """``Pr[sum of labels on an L-cycle = 0]`` in the NO case."""
    return 0.5 * (1.0 + (1.0 - 2.0 * eps) ** L)


def cycle_label_sums(L: int, eps: float, samples: int, rng, method: str = "interaction") -> np.ndarray:
    """Label sums ``zeta`` of ``samples`` independent NO-case ``L``-cycles.

    ``"interaction"`` labels ``L - 1`` forest edges uniformly and forces the
    closing label by the adversary's rule; ``"planted"`` draws a hidden ``X``
    on the cycle and sets ``Y = X(u) + X(v) + Z``.
    """
    rng = as_generator(rng)
    z = (rng.random((samples, L)) < eps).astype(np.int8)
    if method == "interaction":
        y_path = rng.integers(0, 2, size=(samples, L - 1), dtype=np.int8)
        closing = (z[:, -1] + (y_path + z[:, :-1]).sum(axis=1)) % 2
        y = np.concatenate([y_path, closing[:, None].astype(np.int8)], axis=1)
    elif method == "planted":
        x = rng.integers(0, 2, size=(samples, L), dtype=np.int8)
        y = x ^ np.roll(x, -1, axis=1) ^ z
    else:
        raise ValueError(f"unknown method {method!r}")
    return (y.sum(axis=1) % 2).astype(np.int8)


# -- distinguisher -------------------------------------------------------------------


@dataclass
class DistinguisherResult:
    guess: str
    case: str
    queries: int
    cycles_found: int
    mean_cycle_length: float
    zero_fraction: float
    threshold: float
    abstained: bool
    err: bool

    @property
    def correct(self) -> bool:
        return self.guess == self.case


class _PlayerView:
    """What the player knows: discovered edges, its own spanning forest, found cycles."""

    def __init__(self):
        self.adj: dict[int, list[tuple[int, int]]] = {}
        self.seen_edges: set[int] = set()
        self.labels: dict[int, int] = {}
        self.forest: dict[int, list[tuple[int, int]]] = {}
        self.comp: dict[int, int] = {}
        self.used: set[int] = set()
        self.cycles: list[tuple[int, int]] = []  # (length, zeta)

    def _root(self, v: int) -> int:
        self.comp.setdefault(v, v)
        while self.comp[v] != v:
            self.comp[v] = self.comp[self.comp[v]]
            v = self.comp[v]
        return v

    def _forest_path(self, u: int, v: int) -> list[tuple[int, int]] | None:
        """(vertex, edge) steps of the forest path from ``u`` to ``v``."""
        prev = {u: None}
        frontier = deque([u])
        while frontier:
            x = frontier.popleft()
            if x == v:
                break
            for y, e in self.forest.get(x, ()):
                if y not in prev:
                    prev[y] = (x, e)
                    frontier.append(y)
        if v not in prev:
            return None
        steps, x = [], v
        while prev[x] is not None:
            px, e = prev[x]
            steps.append((x, e))
            x = px
        return steps

    def add(self, u: int, v: int, eid: int, label: int) -> None:
        if eid in self.seen_edges:
            return
        self.seen_edges.add(eid)
        self.labels[eid] = label
        self.adj.setdefault(u, []).append((v, eid))
        if u != v:
            self.adj.setdefault(v, []).append((u, eid))
        ru, rv = self._root(u), self._root(v)
        if ru != rv:
            self.comp[ru] = rv
            self.forest.setdefault(u, []).append((v, eid))
            self.forest.setdefault(v, []).append((u, eid))
            return
        steps = self._forest_path(u, v)
        vertices = {u, v} | {x for x, _ in steps}
        if vertices & self.used:
            return
        self.used |= vertices
        zeta = (label + sum(self.labels[e] for _, e in steps)) % 2
        self.cycles.append((len(steps) + 1, zeta))


def cycle_sum_distinguisher(
    session,
    num_seeds: int,
    walks_per_seed: int,
    walk_len: int,
    rng=None,
) -> DistinguisherResult:
    """Guess YES/NO from the label sums of vertex-disjoint discovered cycles.

    From each of ``num_seeds`` uniformly chosen seeds the player runs
    ``walks_per_seed`` non-backtracking walks of ``walk_len`` steps,
    querying every vertex it stands on.  Each edge closing a cycle in the
    player's spanning forest yields a cycle; cycles sharing a vertex with an
    earlier one are skipped.  The guess is NO iff the fraction of cycles with
    label sum 0 exceeds ``(1/2)(1 + (1-2eps)^Lbar / 2)``.  With no cycles the
    player abstains and flips a coin.
    """
    if min(num_seeds, walks_per_seed, walk_len) < 1:
        raise ValueError("budget parameters must be positive")
    if callable(session) and not isinstance(session, InteractionSession):
        session = session()
    rng = as_generator(0 if rng is None else rng)
    view = _PlayerView()
    n = session.n

    def visit(v: int) -> bool:
        if v in session.Q:
            return True
        resp = session.query(v)
        for neighbor, eid, label in resp.edges:
            view.add(v, neighbor, eid, label)
        for a, b_, eid, label in resp.revealed:
            view.add(a, b_, eid, label)
        return not resp.err

    alive = True
    for _ in range(num_seeds):
        if not alive:
            break
        seed_vertex = int(rng.integers(n))
        for _ in range(walks_per_seed):
            here, came_by = seed_vertex, -1
            if not (alive := visit(here)):
                break
            for _ in range(walk_len):
                options = [(y, e) for y, e in view.adj.get(here, ()) if e != came_by]
                if not options:
                    break
                here, came_by = options[int(rng.integers(len(options)))]
                if not (alive := visit(here)):
                    break
            if not alive:
                break

    cycles = view.cycles
    if not cycles:
        guess = "yes" if rng.random() < 0.5 else "no"
        return DistinguisherResult(guess, session.case, session.query_count, 0, 0.0, 0.0, 0.5, True, session.err_flag)
    lengths = np.array([c[0] for c in cycles], dtype=float)
    zeros = float(np.mean([c[1] == 0 for c in cycles]))
    mean_len = float(lengths.mean())
    threshold = 0.5 * (1.0 + (1.0 - 2.0 * session.eps) ** mean_len / 2.0)
    guess = "no" if zeros > threshold else "yes"
    return DistinguisherResult(
        guess, session.case, session.query_count, len(cycles), mean_len, zeros, threshold, False, session.err_flag
    )


def run_distinguisher(
    n: int,
    d: int,
    eps: float,
    sessions: int,
    seed: int,
    num_seeds: int,
    walks_per_seed: int,
    walk_len: int,
    closure: bool = False,
) -> list[DistinguisherResult]:
    """Play ``sessions`` independent games with the case drawn by a fair coin."""
    out = []
    for i in range(sessions):
        session = open_session(n, d, eps, "random", seed=int(stream(seed, "session", i).integers(2**62)), closure=closure)
        out.append(cycle_sum_distinguisher(session, num_seeds, walks_per_seed, walk_len, stream(seed, "player", i)))
    return out
