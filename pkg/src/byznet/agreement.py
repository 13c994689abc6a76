"""Phased randomized binary agreement.

Each phase runs three broadcast rounds (rounds 3i+1, 3i+2, 3i+3). Sub-round
rules count exactly the first n-f validated messages of the awaited round, in
validation order: round 1 adopts a strict majority of the counted set, round 2
sets the ready flag on a value held by strictly more than n/2, and round 3
decides on a value held by strictly more than 2f, adopts one held by strictly
more than f, or falls back to a fair local coin. A decided node pre-broadcasts
its value for all three rounds of the next phase and then terminates.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Optional

from .rbcast import BroadcastLayer, ProtocolMessage


@dataclass(frozen=True)
class Decision:
    node: int
    value: int
    phase_decided: int


class AgreementMachine:
    def __init__(
        self,
        node: int,
        n: int,
        f: int,
        input_bit: int,
        rb: BroadcastLayer,
        rng: random.Random,
        on_decide: Callable[[Decision], None] | None = None,
    ):
        if input_bit not in (0, 1):
            raise ValueError(f"input must be a bit, got {input_bit!r}")
        self.node = node
        self.n = n
        self.f = f
        self.v = input_bit
        self.phase = 0
        self.sub_round = 1
        self.decision: Optional[int] = None
        self.ready_flag = False
        self.terminated = False
        self.coin_tosses = 0
        self.validated: dict[int, dict[int, Optional[int]]] = {}
        self.rb = rb
        self.rng = rng
        self._on_decide = on_decide

    # -- lifecycle -------------------------------------------------------------

    def start(self) -> None:
        self.rb.broadcast(ProtocolMessage(self.node, 1, self.v))

    def on_validated(self, m: ProtocolMessage) -> None:
        per_round = self.validated.setdefault(m.round, {})
        # rbcast validates at most one message per (source, round).
        assert m.source not in per_round, "duplicate validation leaked through rbcast"
        per_round[m.source] = m.value
        self._advance()

    # -- sub-round machinery -----------------------------------------------------

    def _advance(self) -> None:
        need = self.n - self.f
        while not self.terminated:
            awaited = 3 * self.phase + self.sub_round
            per_round = self.validated.get(awaited)
            if per_round is None or len(per_round) < need:
                return
            counted = list(per_round.values())[:need]
            if self.sub_round == 1:
                self._round1(counted)
            elif self.sub_round == 2:
                self._round2(counted)
            else:
                self._round3(counted)

    @staticmethod
    def _top_value(counted, *, skip_empty: bool) -> tuple[Optional[int], int]:
        counts: dict[int, int] = {}
        for value in counted:
            if skip_empty and value is None:
                continue
            counts[value] = counts.get(value, 0) + 1
        if not counts:
            return None, 0
        best = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        return best[0], best[1]

    def _round1(self, counted) -> None:
        value, count = self._top_value(counted, skip_empty=True)
        if value is not None and 2 * count > self.n - self.f:
            self.v = value
        self.sub_round = 2
        self.rb.broadcast(ProtocolMessage(self.node, 3 * self.phase + 2, self.v))

    def _round2(self, counted) -> None:
        value, count = self._top_value(counted, skip_empty=True)
        if value is not None and 2 * count > self.n:
            self.v = value
            self.ready_flag = True
        else:
            self.ready_flag = False
        out = self.v if self.ready_flag else None
        self.sub_round = 3
        self.rb.broadcast(ProtocolMessage(self.node, 3 * self.phase + 3, out))

    def _round3(self, counted) -> None:
        value, count = self._top_value(counted, skip_empty=True)
        if value is not None and count > 2 * self.f:
            self._decide(value)
            return
        if value is not None and count > self.f:
            self.v = value
        else:
            self.v = self.rng.getrandbits(1)
            self.coin_tosses += 1
        self.phase += 1
        self.sub_round = 1
        self.rb.broadcast(ProtocolMessage(self.node, 3 * self.phase + 1, self.v))

    def _decide(self, value: int) -> None:
        self.v = value
        self.decision = value
        next_phase = self.phase + 1
        for j in (1, 2, 3):
            self.rb.broadcast(ProtocolMessage(self.node, 3 * next_phase + j, value))
        # Keep serving echo/ready through the pre-broadcast phase; everyone
        # decides by then, so later rounds need no support from this node.
        self.rb.serving_limit = 3 * next_phase + 3
        self.terminated = True
        if self._on_decide is not None:
            self._on_decide(Decision(self.node, value, self.phase))
