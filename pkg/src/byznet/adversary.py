"""Pluggable Byzantine strategies.

All strategies send only on their own incident edges through simulator ports,
so sender stamping and topology checks apply to them exactly as to honest
nodes. Every strategy is a deterministic function of the trial seed and the
envelopes it has observed.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from .graph import CutPartition, Topology, derive_seed
from .purify import ECHO, INITIAL, FloodEnvelope
from .rbcast import ProtocolMessage
from .stack import NodeStack, node_rng

STRATEGIES = (
    "crash",
    "drop_relay",
    "corrupt_relay",
    "forge_source",
    "equivocate",
    "honest_mimic",
    "split_brain",
)


@dataclass
class AdversarySpec:
    nodes: tuple[int, ...] = ()
    strategy: str = "crash"
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = tuple(sorted(set(self.nodes)))
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")


class TrialContext(NamedTuple):
    topology: Topology
    n: int
    f: int
    trial_seed: int
    inputs: tuple
    part: CutPartition | None = None
    h_events: list | None = None
    chain_memo: dict | None = None


class Adversary:
    """Base: crash - consume every envelope, never send anything."""

    def __init__(self, spec: AdversarySpec, ctx: TrialContext):
        self.spec = spec
        self.ctx = ctx
        self.ports = {}

    def attach(self, sim) -> None:
        for b in self.spec.nodes:
            self.ports[b] = sim.register(b, self.make_handler(b))

    def make_handler(self, node: int):
        def handler(sender, payload):
            return None

        return handler

    def start(self, sim) -> None:
        """One activation before the event loop; default strategies are reactive."""


class DropRelayAdversary(Adversary):
    """Identical to crash at the purify layer: incoming floods are never relayed."""


class CorruptRelayAdversary(Adversary):
    """Relays per the honest path rule but flips the payload value."""

    @staticmethod
    def _corrupt(payload):
        if isinstance(payload, tuple) and len(payload) == 3:
            source, rnd, value = payload
            flipped = 1 - value if value in (0, 1) else 0
            return ProtocolMessage(source, rnd, flipped)
        return None

    def make_handler(self, node: int):
        port = None
        targets = {}
        nbrs = self.ctx.topology.neighbors(node)
        for t in nbrs:
            targets[t] = tuple(v for v in nbrs if v != t)

        def handler(sender, payload):
            nonlocal port
            if port is None:
                port = self.ports[node]
            if not isinstance(payload, FloodEnvelope) or sender == node:
                return
            if node in payload.path:
                return
            corrupted = self._corrupt(payload.payload)
            if corrupted is None:
                return
            env = FloodEnvelope(
                corrupted, payload.src, payload.label, payload.path + (sender,)
            )
            for v in targets.get(sender, ()):
                port.send(v, env)

        return handler


class ForgeSourceAdversary(Adversary):
    """Emits envelopes claiming an honest source, with fabricated G-valid paths."""

    def __init__(self, spec, ctx):
        super().__init__(spec, ctx)
        honest = [u for u in range(ctx.n) if u not in spec.nodes]
        self.victim = spec.options.get("victim", min(honest))
        if self.victim in spec.nodes:
            raise ValueError("forge_source victim must be honest")
        self.repeats = int(spec.options.get("repeats", 3))
        self._emitted = {b: 0 for b in spec.nodes}

    def _fabricated_prefix(self, byz: int) -> tuple:
        """A real G-path from the victim ending adjacent to the forger, so the
        forged envelope survives every receiver's chain check."""
        g = self.ctx.topology
        if g.has_edge(self.victim, byz):
            return (self.victim,)
        parent = {self.victim: None}
        queue = deque([self.victim])
        while queue:
            u = queue.popleft()
            if u == byz:
                break
            for v in g.neighbors(u):
                if v not in parent:
                    parent[v] = u
                    queue.append(v)
        path = []
        cur = byz
        while cur is not None:
            path.append(cur)
            cur = parent[cur]
        path.reverse()
        return tuple(path[:-1])  # drop the forger itself

    def _emit(self, node: int) -> None:
        port = self.ports[node]
        prefix = self._fabricated_prefix(node)
        count = self._emitted[node]
        for label in (INITIAL, ECHO):
            payload = ProtocolMessage(self.victim, 900 + count, 1)
            env = FloodEnvelope(payload, self.victim, label, prefix)
            for v in self.ctx.topology.neighbors(node):
                if v not in env.path:
                    port.send(v, env)
        self._emitted[node] = count + 1

    def start(self, sim) -> None:
        for b in self.spec.nodes:
            sim.activate(b, lambda b=b: self._emit(b))

    def make_handler(self, node: int):
        def handler(sender, payload):
            # Re-forge occasionally, driven by observed traffic.
            if self._emitted[node] < self.repeats and sender != node:
                self._emit(node)

        return handler


class _StackAdversary(Adversary):
    """Shared machinery for strategies that run the honest stack internally."""

    def _input_for(self, node: int) -> int:
        if "input" in self.spec.options:
            return int(self.spec.options["input"])
        return node_rng(self.ctx.trial_seed, node, 7).getrandbits(1)

    def _build_stack(self, node: int, send) -> NodeStack:
        ctx = self.ctx
        return NodeStack(
            node,
            ctx.topology,
            ctx.n,
            ctx.f,
            send,
            layer="agreement",
            input_bit=self._input_for(node),
            rng=node_rng(ctx.trial_seed, node),
            chain_memo=ctx.chain_memo,
        )

    def attach(self, sim) -> None:
        self.stacks = {}
        for b in self.spec.nodes:
            port = sim.register(b, self._dispatch(b))
            self.ports[b] = port
            self.stacks[b] = self._build_stack(b, self._sender(b))

    def _sender(self, node: int):
        return lambda receiver, env: self.ports[node].send(receiver, env)

    def _dispatch(self, node: int):
        return lambda sender, payload: self.stacks[node].on_envelope(sender, payload)

    def start(self, sim) -> None:
        for b in self.spec.nodes:
            sim.activate(b, self.stacks[b].start)


class HonestMimicAdversary(_StackAdversary):
    """Byzantine in name only: runs the honest protocol with a chosen input."""


class EquivocateAdversary(_StackAdversary):
    """Runs the honest machine but splits every broadcast: neighbors in the
    configured side receive value 0, the complement receives value 1."""

    def __init__(self, spec, ctx):
        super().__init__(spec, ctx)
        default_side = tuple(range(0, ctx.n, 2))
        self.side = frozenset(spec.options.get("side", default_side))

    def _sender(self, node: int):
        side = self.side

        def send(receiver, env):
            if (
                receiver != node
                and isinstance(env, FloodEnvelope)
                and env.label == INITIAL
                and env.src == node
                and not env.path
                and isinstance(env.payload, tuple)
                and len(env.payload) == 3
            ):
                forced = 0 if receiver in side else 1
                env = FloodEnvelope(
                    ProtocolMessage(node, env.payload[1], forced), node, INITIAL, ()
                )
            self.ports[node].send(receiver, env)

        return send


class SplitBrainError(RuntimeError):
    pass


class SplitBrainAdversary(Adversary):
    """The tight-connectivity construction: Byzantine cut nodes in R jointly
    simulate the missing half of the indexed double cover H, reacting to real
    X nodes as their index-0 copies and to real Y and T nodes as the index-1
    copies. Simulated instances run the honest stack verbatim."""

    MAX_INTERNAL_STEPS = 10_000_000

    def __init__(self, spec, ctx):
        super().__init__(spec, ctx)
        part = ctx.part
        if part is None:
            raise SplitBrainError("split_brain needs a cut partition in the context")
        part.validate(ctx.topology, ctx.f)
        if set(spec.nodes) != set(part.r):
            raise SplitBrainError("split_brain byzantine set must equal R")
        self.part = part
        self.n = ctx.n
        # Real honest nodes play these H indices: X as copy 0, Y/T as copy 1.
        self.side_idx = {u: 0 for u in part.x}
        self.side_idx.update({u: 1 for u in part.y | part.t})
        # Minimal closed simulated set: opposite copies of X, Y, T plus both R roles.
        roles = [(u, 1) for u in sorted(part.x)]
        roles += [(u, 0) for u in sorted(part.y | part.t)]
        for r in sorted(part.r):
            roles += [(r, 0), (r, 1)]
        self.instances: dict[tuple[int, int], NodeStack] = {}
        self.decisions: dict[tuple[int, int], object] = {}
        self._self_q: dict[tuple[int, int], deque] = {}
        self._internal: deque = deque()
        self._roles = sorted(roles)
        for u, i in self._roles:
            self.instances[(u, i)] = NodeStack(
                u,
                ctx.topology,
                ctx.n,
                ctx.f,
                self._instance_sender(u, i),
                layer="agreement",
                input_bit=i,
                rng=node_rng(ctx.trial_seed, u, i),
                on_decide=self._record_decision(u, i),
                chain_memo=ctx.chain_memo,
            )
            self._self_q[(u, i)] = deque()

    # -- H wiring ------------------------------------------------------------

    def _crossed(self, u: int, v: int) -> bool:
        sets = {self.part.set_of(u), self.part.set_of(v)}
        return sets == {"x", "t"}

    def _is_simulated(self, v: int, j: int) -> bool:
        if v in self.part.r:
            return True
        return j != self.side_idx[v]

    def _record_decision(self, u, i):
        def hook(decision):
            self.decisions[(u, i)] = decision

        return hook

    def _h_event(self, src, dst, payload) -> None:
        if self.ctx.h_events is not None:
            n = self.n
            self.ctx.h_events.append(
                (src[0] + src[1] * n, dst[0] + dst[1] * n, payload)
            )

    def _instance_sender(self, u: int, i: int):
        def send(v, env):
            if v == u:
                self._self_q[(u, i)].append(env)
                return
            j = (1 - i) if self._crossed(u, v) else i
            if self._is_simulated(v, j):
                self._internal.append(((u, i), (v, j), env))
            else:
                # Boundary traffic exits through the real Byzantine node u in R.
                if u not in self.ports:
                    raise SplitBrainError(
                        f"simulated ({u},{i}) has a real neighbor but {u} is not Byzantine"
                    )
                self.ports[u].send(v, env)

        return send

    def _deliver(self, dst, logical_sender: int, env) -> None:
        inst = self.instances[dst]
        inst.on_envelope(logical_sender, env)
        q = self._self_q[dst]
        while q:
            inst.on_envelope(dst[0], q.popleft())

    def _drain_internal(self) -> None:
        steps = 0
        while self._internal:
            src, dst, env = self._internal.popleft()
            self._h_event(src, dst, env)
            self._deliver(dst, src[0], env)
            steps += 1
            if steps > self.MAX_INTERNAL_STEPS:
                raise SplitBrainError("internal simulation did not quiesce")

    # -- simulator interface ----------------------------------------------------

    def make_handler(self, r: int):
        def handler(sender, payload):
            if sender == r:
                return
            i = self.side_idx[sender]
            self._h_event((sender, i), (r, i), payload)
            self._deliver((r, i), sender, payload)
            self._drain_internal()

        return handler

    def start(self, sim) -> None:
        for role in self._roles:
            inst = self.instances[role]
            inst.start()
            q = self._self_q[role]
            while q:
                inst.on_envelope(role[0], q.popleft())
        self._drain_internal()


_BUILDERS = {
    "crash": Adversary,
    "drop_relay": DropRelayAdversary,
    "corrupt_relay": CorruptRelayAdversary,
    "forge_source": ForgeSourceAdversary,
    "equivocate": EquivocateAdversary,
    "honest_mimic": HonestMimicAdversary,
    "split_brain": SplitBrainAdversary,
}


def build_adversary(spec: AdversarySpec, ctx: TrialContext) -> Adversary | None:
    if not spec.nodes:
        return None
    return _BUILDERS[spec.strategy](spec, ctx)
