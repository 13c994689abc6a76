"""Undirected communication graphs: connectivity certification, internally
disjoint paths, fixture generators, and the indexed double-cover construction
used by the split-brain harness."""
from __future__ import annotations

import hashlib
import itertools
import random
from dataclasses import dataclass
from functools import cached_property


class GraphError(ValueError):
    """Malformed graph, path, or partition input."""


class GenerationError(RuntimeError):
    """A randomized generator exhausted its retry budget."""


def _norm_edge(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


def derive_seed(*parts) -> int:
    """Stable cross-process seed derivation (never the salted builtin hash)."""
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class Topology:
    """Immutable undirected graph over node ids 0..n-1."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"node count must be positive, got {self.n}")
        for u, v in self.edges:
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if not (0 <= u < v < self.n):
                raise GraphError(f"edge ({u}, {v}) out of range or unnormalized")

    @classmethod
    def from_edges(cls, n: int, pairs) -> "Topology":
        norm = set()
        for u, v in pairs:
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            norm.add(_norm_edge(u, v))
        return cls(n, frozenset(norm))

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return tuple(tuple(sorted(b)) for b in nbrs)

    @cached_property
    def adjacency_sets(self) -> tuple[frozenset[int], ...]:
        return tuple(frozenset(b) for b in self.adjacency)

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self.adjacency[u]

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def has_edge(self, u: int, v: int) -> bool:
        return _norm_edge(u, v) in self.edges if u != v else False

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def is_connected(self) -> bool:
        if self.n == 1:
            return True
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in self.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def load_topology(path) -> Topology:
    """Read the plain-text graph format: first line `n m`, then m lines `u v`."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise GraphError("graph file must start with 'n m'")
    n, m = int(tokens[0]), int(tokens[1])
    body = tokens[2:]
    if len(body) != 2 * m:
        raise GraphError(f"expected {2 * m} endpoint tokens, got {len(body)}")
    seen = set()
    for i in range(m):
        u, v = int(body[2 * i]), int(body[2 * i + 1])
        if u == v:
            raise GraphError(f"self-loop at node {u} in graph file")
        e = _norm_edge(u, v)
        if e in seen:
            raise GraphError(f"duplicate edge {e} in graph file")
        seen.add(e)
    return Topology.from_edges(n, seen)


def dump_topology(g: Topology, path) -> None:
    lines = [f"{g.n} {g.edge_count}"]
    lines += [f"{u} {v}" for u, v in g.sorted_edges()]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def is_path(g: Topology, nodes) -> bool:
    """True iff `nodes` is a nonempty sequence of distinct vertices chained by edges."""
    seq = list(nodes)
    if not seq or len(set(seq)) != len(seq):
        return False
    if any(not (0 <= x < g.n) for x in seq):
        return False
    return all(g.has_edge(a, b) for a, b in zip(seq, seq[1:]))


def are_internally_disjoint(paths) -> bool:
    """True iff no node other than the two shared endpoints appears in more
    than one of the given paths. All paths must share the same endpoints."""
    seqs = [tuple(p) for p in paths]
    if not seqs:
        return True
    head, tail = seqs[0][0], seqs[0][-1]
    for p in seqs:
        if len(p) < 2 or p[0] != head or p[-1] != tail:
            raise GraphError("paths do not share the same two endpoints")
    seen: set[int] = set()
    for p in seqs:
        for x in p[1:-1]:
            if x in seen:
                return False
            seen.add(x)
    return True


# ---------------------------------------------------------------------------
# Local connectivity via max flow on the vertex-split network.
# Node w splits into w_in = 2w and w_out = 2w + 1; every arc has capacity 1,
# so each internal vertex carries at most one unit and the integral flow
# decomposes into internally disjoint paths.
# ---------------------------------------------------------------------------


def _split_flow(g: Topology, s: int, t: int) -> tuple[int, dict[tuple[int, int], int]]:
    adj: dict[int, list[int]] = {}
    cap: dict[tuple[int, int], int] = {}

    def arc(a, b):
        cap[(a, b)] = 1
        cap.setdefault((b, a), 0)
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)

    for w in range(g.n):
        arc(2 * w, 2 * w + 1)
    for u, v in g.sorted_edges():
        arc(2 * u + 1, 2 * v)
        arc(2 * v + 1, 2 * u)
    for a in adj:
        adj[a].sort()

    src, sink = 2 * s + 1, 2 * t
    flow: dict[tuple[int, int], int] = {}
    value = 0
    while True:
        parent = {src: None}
        queue = [src]
        qi = 0
        while qi < len(queue) and sink not in parent:
            a = queue[qi]
            qi += 1
            for b in adj.get(a, ()):
                if b not in parent and cap[(a, b)] - flow.get((a, b), 0) > 0:
                    parent[b] = a
                    queue.append(b)
        if sink not in parent:
            return value, flow
        b = sink
        while parent[b] is not None:
            a = parent[b]
            flow[(a, b)] = flow.get((a, b), 0) + 1
            flow[(b, a)] = flow.get((b, a), 0) - 1
            b = a
        value += 1


def local_connectivity(g: Topology, u: int, v: int) -> int:
    """Maximum number of internally disjoint u-v paths."""
    if u == v:
        raise GraphError("local connectivity requires two distinct nodes")
    return _split_flow(g, u, v)[0]


def max_disjoint_paths(g: Topology, u: int, v: int) -> tuple[int, list[tuple[int, ...]]]:
    """A maximum-cardinality set of pairwise internally disjoint u-v paths.

    Output is canonical: augmentation follows node-id order and the returned
    paths are sorted lexicographically.
    """
    if u == v:
        raise GraphError("max_disjoint_paths requires two distinct nodes")
    value, flow = _split_flow(g, u, v)

    def net(a, b):
        return flow.get((a, b), 0)

    paths = []
    src, sink = 2 * u + 1, 2 * v
    starts = sorted(w for w in range(g.n) if net(src, 2 * w) > 0)
    for w in starts:
        path = [u]
        flow[(src, 2 * w)] -= 1
        cur = w
        while True:
            path.append(cur)
            if 2 * cur == sink:
                break
            flow[(2 * cur, 2 * cur + 1)] -= 1
            nxt = min(x for x in range(g.n) if net(2 * cur + 1, 2 * x) > 0)
            flow[(2 * cur + 1, 2 * nxt)] -= 1
            cur = nxt
        paths.append(tuple(path))
    paths.sort()
    assert len(paths) == value
    return value, paths


def vertex_connectivity(g: Topology) -> int:
    """Largest k such that the graph stays connected after removing any k-1
    vertices; n-1 for complete graphs, 0 for disconnected ones."""
    n = g.n
    if n == 1:
        return 0
    if not g.is_connected():
        return 0
    if g.edge_count == n * (n - 1) // 2:
        return n - 1
    # Any minimum cut either separates a minimum-degree node v from a
    # non-neighbor, or contains v and separates two of v's neighbors.
    v = min(range(n), key=lambda x: (g.degree(x), x))
    best = g.degree(v)
    nbrs = g.adjacency_sets[v]
    for w in range(n):
        if w != v and w not in nbrs:
            best = min(best, local_connectivity(g, v, w))
    for x, y in itertools.combinations(g.adjacency[v], 2):
        if not g.has_edge(x, y):
            best = min(best, local_connectivity(g, x, y))
    return best


# ---------------------------------------------------------------------------
# Cut partitions and the double cover.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CutPartition:
    """Disjoint vertex sets X, Y, R, T with R+T a vertex cut separating X from Y."""

    x: frozenset[int]
    y: frozenset[int]
    r: frozenset[int]
    t: frozenset[int]

    def __post_init__(self):
        sets = [self.x, self.y, self.r, self.t]
        if any(not s for s in sets):
            raise GraphError("all four partition sets must be non-empty")
        total = sum(len(s) for s in sets)
        if len(self.x | self.y | self.r | self.t) != total:
            raise GraphError("partition sets must be pairwise disjoint")

    @property
    def nodes(self) -> frozenset[int]:
        return self.x | self.y | self.r | self.t

    def set_of(self, u: int) -> str:
        if u in self.x:
            return "x"
        if u in self.y:
            return "y"
        if u in self.r:
            return "r"
        if u in self.t:
            return "t"
        raise GraphError(f"node {u} not covered by partition")

    def validate(self, g: Topology, f: int | None = None) -> None:
        if self.nodes != frozenset(range(g.n)):
            raise GraphError("partition does not cover the node set exactly")
        for u, v in g.edges:
            su, sv = self.set_of(u), self.set_of(v)
            if {su, sv} == {"x", "y"}:
                raise GraphError(f"edge ({u}, {v}) joins X and Y directly")
        if f is not None and (len(self.r) > f or len(self.t) > f):
            raise GraphError(f"|R| and |T| must each be at most f={f}")


def build_double_cover(g: Topology, part: CutPartition) -> Topology:
    """Two indexed copies of every node; edges duplicated index-aligned except
    X-T edges, which cross the copy indices: (u, v) becomes (u1, v0), (u0, v1)."""
    part.validate(g)
    n = g.n
    out = set()
    for u, v in g.edges:
        crossed = {part.set_of(u), part.set_of(v)} == {"x", "t"}
        if crossed:
            out.add(_norm_edge(u + n, v))
            out.add(_norm_edge(u, v + n))
        else:
            out.add(_norm_edge(u, v))
            out.add(_norm_edge(u + n, v + n))
    return Topology.from_edges(2 * n, out)


# ---------------------------------------------------------------------------
# Fixture generators.
# ---------------------------------------------------------------------------

MAX_GENERATOR_ATTEMPTS = 1000


def complete_graph(n: int) -> Topology:
    if n < 1:
        raise GraphError("complete graph needs n >= 1")
    return Topology.from_edges(n, itertools.combinations(range(n), 2))


def cycle_graph(n: int) -> Topology:
    if n < 3:
        raise GraphError("cycle needs n >= 3")
    return Topology.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def wheel_graph(n: int) -> Topology:
    """Hub node 0 joined to a rim cycle on nodes 1..n-1."""
    if n < 4:
        raise GraphError("wheel needs n >= 4")
    rim = list(range(1, n))
    edges = [(0, v) for v in rim]
    edges += [(rim[i], rim[(i + 1) % len(rim)]) for i in range(len(rim))]
    return Topology.from_edges(n, edges)


def random_k_connected(n: int, k: int, seed: int, p: float | None = None) -> Topology:
    """Seeded Erdos-Renyi retries until the connectivity certificate passes."""
    if not (1 <= k <= n - 1):
        raise GraphError(f"infeasible connectivity target k={k} for n={n}")
    base = p if p is not None else min(0.85, (k + 1.0) / n + 0.15)
    for attempt in range(MAX_GENERATOR_ATTEMPTS):
        rng = random.Random(derive_seed("kconn", seed, attempt))
        p_try = min(0.98, base + (0.98 - base) * attempt / MAX_GENERATOR_ATTEMPTS)
        edges = [e for e in itertools.combinations(range(n), 2) if rng.random() < p_try]
        g = Topology.from_edges(n, edges)
        if vertex_connectivity(g) >= k:
            return g
    raise GenerationError(
        f"no {k}-connected graph on {n} nodes found in {MAX_GENERATOR_ATTEMPTS} attempts"
    )


def cut_partition_graph(
    nx: int,
    ny: int,
    nr: int,
    nt: int,
    density: float = 1.0,
    seed: int = 0,
) -> tuple[Topology, CutPartition]:
    """Graph with node blocks X=[0,nx), Y, R, T in id order, no X-Y edges, and
    R+T forming a vertex cut. Intra-set edges are complete; cross-cut edge
    families are sampled at `density` (1.0 keeps them all)."""
    if min(nx, ny, nr, nt) < 1:
        raise GraphError("all four cut-partition blocks must be non-empty")
    if not (0.0 < density <= 1.0):
        raise GraphError("density must be in (0, 1]")
    n = nx + ny + nr + nt
    xs = list(range(0, nx))
    ys = list(range(nx, nx + ny))
    rs = list(range(nx + ny, nx + ny + nr))
    ts = list(range(nx + ny + nr, n))
    part = CutPartition(frozenset(xs), frozenset(ys), frozenset(rs), frozenset(ts))

    cross_families = [(xs, rs), (xs, ts), (ys, rs), (ys, ts), (rs, ts)]
    for attempt in range(MAX_GENERATOR_ATTEMPTS):
        rng = random.Random(derive_seed("cutpart", seed, attempt))
        edges = set()
        for block in (xs, ys, rs, ts):
            edges.update(itertools.combinations(block, 2))
        for side_a, side_b in cross_families:
            pairs = [(a, b) for a in side_a for b in side_b]
            kept = [e for e in pairs if density >= 1.0 or rng.random() < density]
            if not kept:
                kept = [pairs[0]]
            edges.update(kept)
        g = Topology.from_edges(n, edges)
        if g.is_connected():
            part.validate(g)
            return g, part
    raise GenerationError("could not realize a connected cut-partition graph")


def gen_topology(kind: str, params: dict | None = None, seed: int | None = None) -> Topology:
    """Dispatch generator used by config files and the CLI."""
    params = dict(params or {})
    seed = 0 if seed is None else seed
    try:
        if kind == "complete":
            return complete_graph(int(params["n"]))
        if kind == "cycle":
            return cycle_graph(int(params["n"]))
        if kind == "wheel":
            return wheel_graph(int(params["n"]))
        if kind == "random_k_connected":
            return random_k_connected(
                int(params["n"]), int(params["k"]), seed, params.get("p")
            )
        if kind == "cut_partition":
            g, _ = cut_partition_graph(
                int(params["x"]),
                int(params["y"]),
                int(params["r"]),
                int(params["t"]),
                float(params.get("density", 1.0)),
                seed,
            )
            return g
    except KeyError as exc:
        raise GraphError(f"generator '{kind}' missing parameter {exc}") from None
    raise GraphError(f"unknown topology kind '{kind}'")
