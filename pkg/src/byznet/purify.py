"""Path-flooding message purification.

Every message floods with a recorded node path (head = claimed source, each
honest relay appends the hop it received from). A node accepts a
(payload, source, label) triple once it holds more than f stored copies whose
routes are pairwise internally disjoint, which yields a reliable authenticated
virtual channel between every node pair on sufficiently connected graphs.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

from .graph import Topology

INITIAL, ECHO, READY = 0, 1, 2
LABELS = {"initial": INITIAL, "echo": ECHO, "ready": READY}


class FloodEnvelope(NamedTuple):
    payload: object
    src: int  # claimed original sender
    label: int
    path: tuple  # nodes traversed so far, head = src, empty at origin


@dataclass
class PurifyMetrics:
    stored: int = 0
    accepted: int = 0
    loop_discards: int = 0
    invalid_discards: int = 0
    duplicate_discards: int = 0
    cap_skips: int = 0
    searches: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def exists_disjoint_subset(masks, need: int) -> bool:
    """Exact check for `need` pairwise disjoint internal-node bitmasks."""
    if need <= 0:
        return True
    ms = sorted(masks, key=lambda m: (bin(m).count("1"), m))
    if len(ms) < need:
        return False
    # Cheap infeasibility bound: the `need` thinnest masks must fit the pool.
    pool = 0
    for m in ms:
        pool |= m
    if sum(bin(m).count("1") for m in ms[:need]) > bin(pool).count("1"):
        return False

    def dfs(i: int, used: int, left: int) -> bool:
        if left == 0:
            return True
        if len(ms) - i < left:
            return False
        for j in range(i, len(ms)):
            m = ms[j]
            if not (m & used) and dfs(j + 1, used | m, left - 1):
                return True
        return False

    return dfs(0, 0, need)


def greedy_disjoint_count(masks) -> int:
    """Sound but incomplete fallback: greedy packing by ascending mask size."""
    used = 0
    count = 0
    for m in sorted(masks, key=lambda m: (bin(m).count("1"), m)):
        if not (m & used):
            used |= m
            count += 1
    return count


class _TripleState:
    """Hot-path record for one (payload, source, label) triple at one node."""

    __slots__ = ("routes", "masks", "seen", "accepted")

    def __init__(self):
        self.routes: set | None = set()
        self.masks: set | None = set()
        self.seen = 0
        self.accepted = False


class PurifyLayer:
    """Per-node flooding state: relay, store, and disjoint-route acceptance."""

    def __init__(
        self,
        node: int,
        topology: Topology,
        f: int,
        send: Callable[[int, object], None],
        on_accept: Callable[[object, int, int], None],
        *,
        path_cap: int | None = None,
        exact_search: bool = True,
        chain_memo: dict | None = None,
    ):
        self.node = node
        self.f = f
        self.topology = topology
        self._send = send
        self._on_accept = on_accept
        self._nbrs = topology.neighbors(node)
        self._adj = topology.adjacency_sets
        # Forward fan-out per received-from hop, fixed at build time.
        self._fwd = {t: tuple(v for v in self._nbrs if v != t) for t in self._nbrs}
        self.path_cap = path_cap if path_cap is not None else 10 * topology.n * topology.n
        self.exact_search = exact_search
        self._chain_memo = chain_memo if chain_memo is not None else {}
        self._state: dict = {}  # (payload, src, label) -> _TripleState
        self.metrics = PurifyMetrics()

    # -- sending (Alg. 5 role) ----------------------------------------------

    def send_flood(self, payload, label: int) -> None:
        """Originate a flood with an empty path; self-delivers an accepted copy."""
        env = FloodEnvelope(payload, self.node, label, ())
        send = self._send
        for v in self._nbrs:
            send(v, env)
        send(self.node, env)

    # -- receiving: relay (Alg. 6) + acceptance (Alg. 7) ---------------------

    def on_envelope(self, sender: int, env: FloodEnvelope) -> None:
        payload, src, label, path = env
        me = self.node
        if sender == me:
            # Own flood's self-copy (the simulator stamps senders, so this
            # cannot be forged by a peer).
            self._accept((payload, src, label))
            return
        if me in path:
            self.metrics.loop_discards += 1
            return
        newpath = path + (sender,)
        if newpath[0] != src or not self._chain_ok(newpath):
            self.metrics.invalid_discards += 1
            return
        key = (payload, src, label)
        st = self._state.get(key)
        if st is None:
            st = self._state[key] = _TripleState()
        metrics = self.metrics
        if st.accepted:
            st.seen += 1
            if st.seen > self.path_cap:
                metrics.cap_skips += 1
                return
            metrics.stored += 1
            self._forward(sender, payload, src, label, newpath)
            return
        routes = st.routes
        if newpath in routes:
            metrics.duplicate_discards += 1
            return
        st.seen += 1
        if st.seen > self.path_cap:
            metrics.cap_skips += 1
            return
        routes.add(newpath)
        metrics.stored += 1
        self._forward(sender, payload, src, label, newpath)
        # Internal nodes of the full route u..me: the recorded path minus the
        # claimed source at its head (this node is the implicit terminus).
        mask = 0
        for x in newpath[1:]:
            mask |= 1 << x
        masks = st.masks
        if mask not in masks:
            masks.add(mask)
            metrics.searches += 1
            if self._enough_disjoint(masks):
                self._accept(key)

    def _forward(self, came_from: int, payload, src, label, newpath) -> None:
        targets = self._fwd.get(came_from)
        if targets is None:  # received from a non-neighbor is impossible via simnet
            targets = tuple(v for v in self._nbrs if v != came_from)
        if targets:
            fenv = FloodEnvelope(payload, src, label, newpath)
            send = self._send
            for v in targets:
                send(v, fenv)

    def _chain_ok(self, p: tuple) -> bool:
        memo = self._chain_memo
        r = memo.get(p)
        if r is None:
            if len(p) == 1:
                r = 0 <= p[0] < self.topology.n
            else:
                r = (
                    self._chain_ok(p[:-1])
                    and p[-1] in self._adj[p[-2]]
                    and p[-1] not in p[:-1]
                )
            memo[p] = r
        return r

    def _enough_disjoint(self, masks) -> bool:
        need = self.f + 1
        if len(masks) < need:
            return False
        if self.exact_search:
            return exists_disjoint_subset(masks, need)
        return greedy_disjoint_count(masks) >= need

    def _accept(self, key) -> None:
        st = self._state.get(key)
        if st is None:
            st = self._state[key] = _TripleState()
        if st.accepted:
            return
        st.accepted = True
        # Stored routes for an accepted triple no longer feed any decision;
        # drop them and keep only the arrival counter.
        st.routes = None
        st.masks = None
        self.metrics.accepted += 1
        payload, src, label = key
        self._on_accept(payload, src, label)

    # -- introspection --------------------------------------------------------

    @property
    def accepted(self) -> set:
        return {key for key, st in self._state.items() if st.accepted}

    def stored_routes(self, payload, src, label) -> set:
        st = self._state.get((payload, src, label))
        return set(st.routes) if st is not None and st.routes is not None else set()

    def has_accepted(self, payload, src, label) -> bool:
        st = self._state.get((payload, src, label))
        return st is not None and st.accepted
