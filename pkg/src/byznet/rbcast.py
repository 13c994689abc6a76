"""Authenticated double-echo reliable broadcast over the purify layer.

A broadcast floods once with label `initial`; receivers echo it, send `ready`
after strictly more than (n+f)/2 distinct echoers (or more than f distinct
ready peers, the amplification step), and validate after strictly more than
2f distinct ready peers. Thresholds count distinct peers, a node's own
echo/ready included via self-delivery.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

from .purify import ECHO, INITIAL, READY, PurifyLayer


class ProtocolMessage(NamedTuple):
    source: int
    round: int
    value: Optional[int]  # 0, 1, or None (the empty value, sub-round 3 only)


class ProtocolError(RuntimeError):
    """Honest-node protocol discipline violation (e.g. double broadcast)."""


def coerce_message(payload, n: int) -> ProtocolMessage | None:
    """Validate wire shape; Byzantine nodes may emit arbitrary payloads."""
    if isinstance(payload, tuple) and len(payload) == 3:
        source, rnd, value = payload
        if (
            isinstance(source, int)
            and isinstance(rnd, int)
            and 0 <= source < n
            and rnd >= 1
            and (value in (0, 1) or (value is None and rnd % 3 == 0))
        ):
            return ProtocolMessage(source, rnd, value)
    return None


@dataclass
class BroadcastMetrics:
    echoes_sent: int = 0
    readies_sent: int = 0
    validations: int = 0
    malformed: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


class BroadcastLayer:
    """Per-node double-echo state machine, fed by purify acceptance events."""

    def __init__(
        self,
        node: int,
        n: int,
        f: int,
        purify: PurifyLayer,
        on_validate: Callable[[ProtocolMessage], None],
        on_broadcast: Callable[[ProtocolMessage], None] | None = None,
    ):
        self.node = node
        self.n = n
        self.f = f
        self.purify = purify
        self._on_validate = on_validate
        self._on_broadcast = on_broadcast
        self._echo_peers: dict = {}  # (source, round) -> {peer: value}
        self._echo_counts: dict = {}  # message -> distinct echo peers
        self._ready_peers: dict = {}  # (source, round) -> {peer: value}
        self._ready_counts: dict = {}  # message -> distinct ready peers
        self._echoed: set = set()  # (source, round) already echoed
        self._ready_sent: set = set()  # exact messages
        self.val: dict = {}  # (source, round) -> validated value
        self._broadcast_rounds: set = set()
        # Rounds above this limit are not echoed/readied (set after deciding);
        # None means serve everything.
        self.serving_limit: int | None = None
        self.metrics = BroadcastMetrics()

    # -- Alg. 2: broadcast ----------------------------------------------------

    def broadcast(self, m: ProtocolMessage) -> None:
        if m.source != self.node:
            raise ProtocolError(f"node {self.node} cannot broadcast for {m.source}")
        if m.round in self._broadcast_rounds:
            raise ProtocolError(f"node {self.node} already broadcast round {m.round}")
        self._broadcast_rounds.add(m.round)
        if self._on_broadcast is not None:
            self._on_broadcast(m)
        self.purify.send_flood(m, INITIAL)

    # -- purify upcall ----------------------------------------------------------

    def on_accept(self, payload, src: int, label: int) -> None:
        m = coerce_message(payload, self.n)
        if m is None:
            self.metrics.malformed += 1
            return
        if label == INITIAL:
            self._on_initial(m, src)
        elif label == ECHO:
            self._on_echo(m, src)
        elif label == READY:
            self._on_ready(m, src)
        else:
            self.metrics.malformed += 1

    def _serving(self, rnd: int) -> bool:
        return self.serving_limit is None or rnd <= self.serving_limit

    # -- Alg. 3 ----------------------------------------------------------------

    def _on_initial(self, m: ProtocolMessage, src: int) -> None:
        if m.source != src:
            return  # claimed source disagrees with the flood origin
        key = (m.source, m.round)
        if key in self._echoed or not self._serving(m.round):
            return
        self._echoed.add(key)
        self.metrics.echoes_sent += 1
        self.purify.send_flood(m, ECHO)

    def _on_echo(self, m: ProtocolMessage, peer: int) -> None:
        key = (m.source, m.round)
        rec = self._echo_peers.get(key)
        if rec is None:
            rec = self._echo_peers[key] = {}
        if peer in rec:
            return  # first message per (source, round) from a peer wins
        rec[peer] = m.value
        count = self._echo_counts.get(m, 0) + 1
        self._echo_counts[m] = count
        if 2 * count > self.n + self.f:
            self._send_ready(m)

    def _on_ready(self, m: ProtocolMessage, peer: int) -> None:
        key = (m.source, m.round)
        rec = self._ready_peers.get(key)
        if rec is None:
            rec = self._ready_peers[key] = {}
        if peer in rec:
            return
        rec[peer] = m.value
        count = self._ready_counts.get(m, 0) + 1
        self._ready_counts[m] = count
        if count > self.f:
            self._send_ready(m)  # amplification
        if count > 2 * self.f and key not in self.val:
            self.val[key] = m.value
            self.metrics.validations += 1
            self._on_validate(m)

    def _send_ready(self, m: ProtocolMessage) -> None:
        if m in self._ready_sent or not self._serving(m.round):
            return
        self._ready_sent.add(m)
        self.metrics.readies_sent += 1
        self.purify.send_flood(m, READY)
