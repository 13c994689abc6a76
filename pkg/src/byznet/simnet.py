"""Discrete-event asynchronous network simulator.

Single-threaded and deterministic: authenticated point-to-point channels over
a fixed topology, per-pair FIFO delivery, pluggable schedulers (fifo, seeded
random, adversarial with a fairness bound), and optional trace recording.
Self-sends bypass the channel queues and are handled right after the sending
node's current activation completes.
"""
from __future__ import annotations

import hashlib
import random
from collections import deque
from typing import Callable, NamedTuple

from .graph import Topology, derive_seed

Handler = Callable[[int, object], None]

LABEL_NAMES = {0: "initial", 1: "echo", 2: "ready"}


class TopologyViolation(RuntimeError):
    """A send was attempted on a non-edge. Byzantine power excludes edge creation."""


class Envelope(NamedTuple):
    sender: int
    receiver: int
    payload: object
    send_seq: int


class RunOutcome(NamedTuple):
    status: str  # predicate_met | stalled | budget_exhausted
    events: int


def payload_digest(payload) -> str:
    return hashlib.sha1(repr(payload).encode()).hexdigest()[:12]


def _payload_label(payload) -> str:
    label = getattr(payload, "label", None)
    return LABEL_NAMES.get(label, "-") if isinstance(label, int) else "-"


class FifoPolicy:
    """Global FIFO; trivially preserves per-pair order."""

    kind = "fifo"

    def __init__(self):
        self._queue = deque()

    def pending(self) -> int:
        return len(self._queue)

    def enqueue(self, sender, receiver, seq, payload):
        self._queue.append((sender, receiver, seq, payload))

    def dequeue(self):
        return self._queue.popleft() if self._queue else None


class RandomPolicy:
    """Delivers the head of a uniformly chosen nonempty channel; fully seeded."""

    kind = "random"

    def __init__(self, seed: int = 0):
        self._rng = random.Random(derive_seed("sched-random", seed))
        self._random = self._rng.random
        self._channels: dict[tuple[int, int], deque] = {}
        self._nonempty: list[tuple[int, int]] = []
        self._pos: dict[tuple[int, int], int] = {}
        self._count = 0

    def pending(self) -> int:
        return self._count

    def enqueue(self, sender, receiver, seq, payload):
        key = (sender, receiver)
        ch = self._channels.get(key)
        if ch is None:
            ch = self._channels[key] = deque()
        if not ch:
            self._pos[key] = len(self._nonempty)
            self._nonempty.append(key)
        ch.append((seq, payload))
        self._count += 1

    def dequeue(self):
        if not self._count:
            return None
        nonempty = self._nonempty
        idx = int(self._random() * len(nonempty))  # uniform enough, much cheaper than randrange
        key = nonempty[idx]
        ch = self._channels[key]
        seq, payload = ch.popleft()
        self._count -= 1
        if not ch:
            last = nonempty.pop()
            if last != key:
                nonempty[idx] = last
                self._pos[last] = idx
            del self._pos[key]
        return key[0], key[1], seq, payload


class AdversarialPolicy:
    """Arbitrary reordering below a hard fairness bound.

    Each envelope gets a delivery deadline of `bound` dequeue steps after its
    enqueue (default: 10x the pending queue size at enqueue time). Past its
    deadline an envelope must be delivered; otherwise the policy delays the
    channel whose head has the highest priority key (default: newest first).
    """

    kind = "adversarial"

    def __init__(self, bound: int | None = None, key_fn=None):
        self.bound = bound
        self._key_fn = key_fn
        self._channels: dict[tuple[int, int], deque] = {}
        self._count = 0
        self._steps = 0

    def pending(self) -> int:
        return self._count

    def enqueue(self, sender, receiver, seq, payload):
        bound = self.bound if self.bound is not None else 10 * (self._count + 1)
        deadline = self._steps + bound
        key = (sender, receiver)
        ch = self._channels.get(key)
        if ch is None:
            ch = self._channels[key] = deque()
        ch.append((seq, payload, deadline))
        self._count += 1

    def dequeue(self):
        if not self._count:
            return None
        self._steps += 1
        # Sequence numbers are unique, so min/max below do not depend on the
        # (deterministic) iteration order of the channel dict.
        heads = [(key, ch[0]) for key, ch in self._channels.items() if ch]
        forced = [(h[2], h[0], key) for key, h in heads if h[2] <= self._steps]
        if forced:
            _, _, pick = min(forced)
        elif self._key_fn is not None:
            pick = max(heads, key=lambda item: self._key_fn(*item[0], item[1][0]))[0]
        else:
            pick = max(heads, key=lambda item: item[1][0])[0]  # newest head first
        ch = self._channels[pick]
        seq, payload, _ = ch.popleft()
        self._count -= 1
        return pick[0], pick[1], seq, payload


def make_policy(kind: str, seed: int = 0, bound: int | None = None):
    if kind == "fifo":
        return FifoPolicy()
    if kind == "random":
        return RandomPolicy(seed)
    if kind == "adversarial":
        return AdversarialPolicy(bound)
    raise ValueError(f"unknown scheduler kind '{kind}'")


class Port:
    """A node's authenticated send capability; the sender stamp cannot be forged."""

    __slots__ = ("_sim", "node", "_adjacent", "_enqueue")

    def __init__(self, sim: "Simulator", node: int):
        self._sim = sim
        self.node = node
        self._adjacent = sim.topology.adjacency_sets[node]
        self._enqueue = sim.policy.enqueue

    def send(self, receiver: int, payload) -> None:
        sim = self._sim
        node = self.node
        if receiver == node:
            sim.sent_count += 1
            q = sim._self_q.get(node)
            if q is None:
                q = sim._self_q[node] = deque()
            q.append((sim.sent_count, payload))
            return
        if receiver not in self._adjacent:
            raise TopologyViolation(
                f"({node}, {receiver}) is not an edge of the topology"
            )
        sim.sent_count += 1
        self._enqueue(node, receiver, sim.sent_count, payload)


class Simulator:
    def __init__(self, topology: Topology, policy=None, record_trace: bool = False):
        self.topology = topology
        self.policy = policy if policy is not None else FifoPolicy()
        self.handlers: dict[int, Handler] = {}
        self._self_q: dict[int, deque] = {}
        self.sent_count = 0
        self.delivered_count = 0
        self.trace: list[tuple[int, int, int, str, str]] | None = (
            [] if record_trace else None
        )

    def register(self, node: int, handler: Handler) -> Port:
        self.handlers[node] = handler
        return Port(self, node)

    def port(self, node: int) -> Port:
        return Port(self, node)

    # -- delivery -----------------------------------------------------------

    def _record(self, sender, receiver, payload):
        self.trace.append(
            (
                self.delivered_count,
                sender,
                receiver,
                payload_digest(payload),
                _payload_label(payload),
            )
        )

    def _drain_self(self, node: int, handler) -> None:
        q = self._self_q.get(node)
        while q:
            _, payload = q.popleft()
            self.delivered_count += 1
            if self.trace is not None:
                self._record(node, node, payload)
            handler(node, payload)

    def deliver_next(self):
        """Deliver one envelope; returns the raw (sender, receiver, seq,
        payload) tuple from the queue, or None when quiescent."""
        item = self.policy.dequeue()
        if item is None:
            return None
        sender, receiver, _seq, payload = item
        self.delivered_count += 1
        if self.trace is not None:
            self._record(sender, receiver, payload)
        handler = self.handlers.get(receiver)
        if handler is not None:
            handler(sender, payload)
            q = self._self_q.get(receiver)
            while q:
                _, p = q.popleft()
                self.delivered_count += 1
                if self.trace is not None:
                    self._record(receiver, receiver, p)
                handler(receiver, p)
        return item

    def step(self) -> Envelope | None:
        """Deliver one envelope per the policy; None when quiescent."""
        item = self.deliver_next()
        if item is None:
            return None
        sender, receiver, seq, payload = item
        return Envelope(sender, receiver, payload, seq)

    def activate(self, node: int, thunk: Callable[[], None]) -> None:
        """Run an out-of-band activation (e.g. protocol start) for a node,
        then drain its pending self-deliveries."""
        thunk()
        handler = self.handlers.get(node)
        if handler is not None:
            self._drain_self(node, handler)

    def quiescent(self) -> bool:
        return self.policy.pending() == 0

    def run_until(self, predicate: Callable[[], bool], max_events: int) -> RunOutcome:
        if max_events <= 0:
            raise ValueError("max_events must be positive")
        start = self.delivered_count
        while True:
            if predicate():
                return RunOutcome("predicate_met", self.delivered_count - start)
            if self.delivered_count - start >= max_events:
                return RunOutcome("budget_exhausted", self.delivered_count - start)
            if self.deliver_next() is None:
                return RunOutcome("stalled", self.delivered_count - start)

    def trace_lines(self) -> list[str]:
        if self.trace is None:
            raise ValueError("trace recording was not enabled for this run")
        return [
            f"{idx}\t{s}\t{r}\t{digest}\t{label}"
            for idx, s, r, digest, label in self.trace
        ]
