"""Composition of the protocol layers for a single honest node.

A NodeStack is transport-agnostic: it sends through a callable and is fed
envelopes through `on_envelope`. The same code drives real simulator nodes,
the instances simulated inside the split-brain adversary, and double-cover
runs where physical node ids differ from the logical ids the protocol sees.
"""
from __future__ import annotations

import random
from typing import Callable

from .agreement import AgreementMachine, Decision
from .graph import Topology, derive_seed
from .purify import INITIAL, PurifyLayer
from .rbcast import BroadcastLayer, ProtocolMessage

LAYERS = ("purify", "rbcast", "agreement")


def node_rng(trial_seed: int, node: int, copy_index: int = 0) -> random.Random:
    return random.Random(derive_seed(trial_seed, "node", node, copy_index))


class NodeStack:
    def __init__(
        self,
        node: int,
        topology: Topology,
        n: int,
        f: int,
        send: Callable[[int, object], None],
        *,
        layer: str = "agreement",
        input_bit: int | None = None,
        rng: random.Random | None = None,
        on_decide: Callable[[Decision], None] | None = None,
        on_validate: Callable[[int, ProtocolMessage], None] | None = None,
        on_broadcast: Callable[[int, ProtocolMessage], None] | None = None,
        on_accept: Callable[[int, object, int, int], None] | None = None,
        chain_memo: dict | None = None,
        path_cap: int | None = None,
        exact_search: bool = True,
    ):
        if layer not in LAYERS:
            raise ValueError(f"unknown layer {layer!r}")
        if input_bit not in (0, 1):
            raise ValueError(f"node {node} needs a bit input, got {input_bit!r}")
        self.node = node
        self.layer = layer
        self.input_bit = input_bit
        self._on_validate = on_validate
        self._on_accept = on_accept
        self.purify = PurifyLayer(
            node,
            topology,
            f,
            send,
            self._accept,
            chain_memo=chain_memo,
            path_cap=path_cap,
            exact_search=exact_search,
        )
        self.rb: BroadcastLayer | None = None
        self.machine: AgreementMachine | None = None
        if layer in ("rbcast", "agreement"):
            self.rb = BroadcastLayer(
                node,
                n,
                f,
                self.purify,
                self._validated,
                on_broadcast=(lambda m: on_broadcast(node, m)) if on_broadcast else None,
            )
        if layer == "agreement":
            self.machine = AgreementMachine(
                node,
                n,
                f,
                input_bit,
                self.rb,
                rng if rng is not None else random.Random(0),
                on_decide=on_decide,
            )

        # Inbound envelopes go straight to the purify layer.
        self.on_envelope = self.purify.on_envelope

    def _accept(self, payload, src: int, label: int) -> None:
        if self.rb is not None:
            self.rb.on_accept(payload, src, label)
        if self._on_accept is not None:
            self._on_accept(self.node, payload, src, label)

    def _validated(self, m: ProtocolMessage) -> None:
        if self._on_validate is not None:
            self._on_validate(self.node, m)
        if self.machine is not None:
            self.machine.on_validated(m)

    # -- outbound ----------------------------------------------------------------

    def start(self) -> None:
        """Kick off this node's role for the configured layer."""
        if self.layer == "agreement":
            self.machine.start()
        elif self.layer == "rbcast":
            self.rb.broadcast(ProtocolMessage(self.node, 1, self.input_bit))
        else:
            self.purify.send_flood(
                ProtocolMessage(self.node, 1, self.input_bit), INITIAL
            )

    @property
    def decided(self) -> bool:
        return self.machine is not None and self.machine.terminated

    @property
    def decision(self):
        return self.machine.decision if self.machine is not None else None
