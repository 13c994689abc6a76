"""Trial configuration, experiment runner, trace audits, and scenarios.

A RunConfig fully determines a trial given a trial index: topology, inputs,
adversary, scheduler, and all seeds derive from it. Property flags are
computed by auditing event logs collected during the run, never by asking
nodes for their own verdicts after the fact.
"""
from __future__ import annotations

import json
import multiprocessing
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import yaml

from .adversary import AdversarySpec, SplitBrainAdversary, TrialContext, build_adversary
from .agreement import Decision
from .graph import (
    CutPartition,
    GraphError,
    Topology,
    build_double_cover,
    cut_partition_graph,
    derive_seed,
    gen_topology,
    load_topology,
)
from .purify import INITIAL
from .rbcast import ProtocolMessage
from .simnet import Simulator, make_policy
from .stack import LAYERS, NodeStack, node_rng


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


class ReplayMismatch(AssertionError):
    """The split-brain composite trace diverged from the double-cover run."""


INPUT_PATTERNS = ("all0", "all1", "split", "random")


@dataclass
class RunConfig:
    topology: dict
    f: int = 0
    inputs: object = "split"
    adversary: AdversarySpec = field(default_factory=AdversarySpec)
    scheduler: dict = field(default_factory=lambda: {"kind": "fifo"})
    seed: int = 0
    trials: int = 1
    max_events: int = 5_000_000
    max_phases: int = 200
    layer: str = "agreement"
    broadcasters: tuple | None = None  # rbcast layer: which honest nodes broadcast
    double_cover: bool = False
    record_trace: bool = False
    record_h_events: bool = False


def load_config(source) -> RunConfig:
    if isinstance(source, dict):
        data = dict(source)
    else:
        with open(source, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config: top level must be a mapping")
    known = {
        "topology",
        "f",
        "inputs",
        "adversary",
        "scheduler",
        "seed",
        "trials",
        "max_events",
        "max_phases",
        "layer",
        "broadcasters",
        "double_cover",
        "record_trace",
        "record_h_events",
    }
    for key in data:
        if key not in known:
            raise ConfigError(f"{key}: unknown config field")

    topo_spec = data.get("topology")
    if not isinstance(topo_spec, dict) or not ({"kind", "file"} & set(topo_spec)):
        raise ConfigError("topology: must be a mapping with 'kind' or 'file'")

    def _int_field(name, default, minimum):
        value = data.get(name, default)
        if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
            raise ConfigError(f"{name}: must be an integer >= {minimum}")
        return value

    f = _int_field("f", 0, 0)
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed: must be an integer")
    trials = _int_field("trials", 1, 1)
    max_events = _int_field("max_events", 5_000_000, 1)
    max_phases = _int_field("max_phases", 200, 1)

    layer = data.get("layer", "agreement")
    if layer not in LAYERS:
        raise ConfigError(f"layer: must be one of {LAYERS}")

    adv_spec = data.get("adversary") or {}
    if not isinstance(adv_spec, dict):
        raise ConfigError("adversary: must be a mapping")
    try:
        adversary = AdversarySpec(
            nodes=tuple(adv_spec.get("nodes", ())),
            strategy=adv_spec.get("strategy", "crash"),
            options=dict(adv_spec.get("options", {})),
        )
    except ValueError as exc:
        raise ConfigError(f"adversary.strategy: {exc}") from None

    sched = data.get("scheduler") or {"kind": "fifo"}
    if isinstance(sched, str):
        sched = {"kind": sched}
    if not isinstance(sched, dict) or sched.get("kind") not in (
        "fifo",
        "random",
        "adversarial",
    ):
        raise ConfigError("scheduler.kind: must be fifo, random, or adversarial")

    cfg = RunConfig(
        topology=dict(topo_spec),
        f=f,
        inputs=data.get("inputs", "split"),
        adversary=adversary,
        scheduler=dict(sched),
        seed=seed,
        trials=trials,
        max_events=max_events,
        max_phases=max_phases,
        layer=layer,
        broadcasters=(
            tuple(data["broadcasters"]) if data.get("broadcasters") is not None else None
        ),
        double_cover=bool(data.get("double_cover", False)),
        record_trace=bool(data.get("record_trace", False)),
        record_h_events=bool(data.get("record_h_events", False)),
    )
    validate_config(cfg)
    return cfg


def resolve_topology(cfg: RunConfig) -> tuple[Topology, Optional[CutPartition]]:
    spec = dict(cfg.topology)
    if "file" in spec:
        return load_topology(spec["file"]), None
    kind = spec.pop("kind")
    if kind == "cut_partition":
        g, part = cut_partition_graph(
            int(spec["x"]),
            int(spec["y"]),
            int(spec["r"]),
            int(spec["t"]),
            float(spec.get("density", 1.0)),
            cfg.seed,
        )
        return g, part
    return gen_topology(kind, spec, cfg.seed), None


def validate_config(cfg: RunConfig) -> None:
    try:
        topo, part = resolve_topology(cfg)
    except (GraphError, KeyError) as exc:
        raise ConfigError(f"topology: {exc}") from None
    n = topo.n
    if 3 * cfg.f >= n:
        raise ConfigError(f"f: need f < n/3, got f={cfg.f} with n={n}")
    byz = cfg.adversary.nodes
    if len(byz) > cfg.f:
        raise ConfigError(f"adversary.nodes: {len(byz)} nodes exceed f={cfg.f}")
    if any(not (0 <= b < n) for b in byz):
        raise ConfigError("adversary.nodes: node id out of range")
    if isinstance(cfg.inputs, str):
        if cfg.inputs not in INPUT_PATTERNS:
            raise ConfigError(f"inputs: unknown pattern {cfg.inputs!r}")
    else:
        bits = list(cfg.inputs)
        if len(bits) != n or any(b not in (0, 1) for b in bits):
            raise ConfigError(f"inputs: need {n} bits")
    if cfg.broadcasters is not None:
        if not cfg.broadcasters:
            raise ConfigError("broadcasters: must be omitted or non-empty")
        if any(not (0 <= b < n) or b in byz for b in cfg.broadcasters):
            raise ConfigError("broadcasters: must be honest node ids")
    if cfg.adversary.strategy == "split_brain":
        if part is None:
            raise ConfigError("adversary: split_brain needs a cut_partition topology")
        if set(byz) != set(part.r):
            raise ConfigError("adversary.nodes: split_brain requires nodes == R")
    if cfg.record_h_events and cfg.adversary.strategy != "split_brain":
        raise ConfigError("record_h_events: only meaningful with split_brain")
    if cfg.double_cover and part is None:
        raise ConfigError("double_cover: needs a cut_partition topology")


def resolve_inputs(spec, n: int, trial_seed: int) -> tuple[int, ...]:
    if not isinstance(spec, str):
        return tuple(spec)
    if spec == "all0":
        return (0,) * n
    if spec == "all1":
        return (1,) * n
    if spec == "split":
        return tuple(0 if u < n // 2 else 1 for u in range(n))
    rng = node_rng(trial_seed, -1, 99)
    return tuple(rng.getrandbits(1) for _ in range(n))


# ---------------------------------------------------------------------------
# Trial results and audits.
# ---------------------------------------------------------------------------


@dataclass
class TrialResult:
    index: int
    seed: int
    n: int
    honest: tuple[int, ...]
    inputs: tuple[int, ...]
    outcome: str
    event_count: int
    decisions: dict
    decision_phases: dict
    phases_to_last_decision: Optional[int]
    flags: dict
    counters: dict
    decision_log: list
    broadcast_log: list = field(default_factory=list)
    validation_log: list = field(default_factory=list)
    accept_log: list = field(default_factory=list)
    send_log: list = field(default_factory=list)
    sim_decisions: dict = field(default_factory=dict)
    h_events: list = field(default_factory=list)
    trace_lines: list = field(default_factory=list)

    @property
    def violated(self) -> bool:
        return any(self.flags.values())


def audit_agreement(honest, inputs, decision_log) -> dict:
    values = {v for (_, _, v, _) in decision_log}
    decided_nodes = {u for (u, _, _, _) in decision_log}
    honest_inputs = {inputs[u] for u in honest}
    flags = {
        "agreement_violation": len(values) > 1,
        "termination_violation": any(u not in decided_nodes for u in honest),
        "validity_violation": False,
        "phase_lag_violation": False,
    }
    if len(honest_inputs) == 1 and decision_log:
        (expected,) = honest_inputs
        flags["validity_violation"] = any(v != expected for (_, _, v, _) in decision_log)
    if decision_log:
        first_phase = min(p for (_, p, _, _) in decision_log)
        late = any(p > first_phase + 1 for (_, p, _, _) in decision_log)
        flags["phase_lag_violation"] = late or flags["termination_violation"]
    return flags


def audit_rbcast(honest, broadcast_log, validation_log) -> dict:
    honest_set = set(honest)
    validated = {}  # node -> {(source, round): value}
    duplication = False
    for node, m, _clk in validation_log:
        per = validated.setdefault(node, {})
        key = (m.source, m.round)
        if key in per:
            duplication = True
        per[key] = m.value

    validity = False
    for node, m, _clk in broadcast_log:
        for w in honest_set:
            if validated.get(w, {}).get((m.source, m.round)) != m.value:
                validity = True

    broadcast_seen = {}
    for node, m, clk in broadcast_log:
        broadcast_seen.setdefault((m.source, m.round, m.value), clk)
    integrity = False
    for node, m, clk in validation_log:
        if m.source in honest_set:
            first = broadcast_seen.get((m.source, m.round, m.value))
            if first is None or first > clk:
                integrity = True

    consistency = False
    by_key = {}
    for node, m, _clk in validation_log:
        by_key.setdefault((m.source, m.round), set()).add(m.value)
    if any(len(vals) > 1 for vals in by_key.values()):
        consistency = True

    totality = False
    for key in by_key:
        for w in honest_set:
            if key not in validated.get(w, {}):
                totality = True

    return {
        "rb_validity_violation": validity,
        "rb_duplication_violation": duplication,
        "rb_integrity_violation": integrity,
        "rb_consistency_violation": consistency,
        "rb_totality_violation": totality,
    }


def audit_purify(honest, send_log, accept_log) -> dict:
    honest_set = set(honest)
    sent = {(u, payload, label) for (u, payload, label) in send_log}
    accepted = {}
    duplication = False
    for node, payload, src, label, _clk in accept_log:
        key = (node, payload, src, label)
        if key in accepted:
            duplication = True
        accepted[key] = True

    validity = False
    for u, payload, label in sent:
        for w in honest_set:
            if (w, payload, u, label) not in accepted:
                validity = True

    integrity = False
    for node, payload, src, label, _clk in accept_log:
        if src in honest_set and (src, payload, label) not in sent:
            integrity = True

    return {
        "purify_validity_violation": validity,
        "purify_integrity_violation": integrity,
        "purify_duplication_violation": duplication,
    }


# ---------------------------------------------------------------------------
# Trial runner.
# ---------------------------------------------------------------------------


def run_trial(cfg: RunConfig, trial_index: int = 0) -> TrialResult:
    trial_seed = derive_seed(cfg.seed, "trial", trial_index)
    topo, part = resolve_topology(cfg)
    if cfg.double_cover:
        return _run_double_cover_trial(cfg, trial_index, trial_seed, topo, part)
    n = topo.n
    byz = set(cfg.adversary.nodes)
    honest = tuple(u for u in range(n) if u not in byz)
    inputs = resolve_inputs(cfg.inputs, n, trial_seed)
    policy = make_policy(
        cfg.scheduler["kind"],
        seed=derive_seed(trial_seed, "sched"),
        bound=cfg.scheduler.get("bound"),
    )
    sim = Simulator(topo, policy, record_trace=cfg.record_trace)

    split_brain = cfg.adversary.strategy == "split_brain"
    side_idx = {}
    if split_brain:
        side_idx = {u: 0 for u in part.x}
        side_idx.update({u: 1 for u in part.y | part.t})

    h_events = [] if (cfg.record_h_events and split_brain) else None
    chain_memo: dict = {}
    decision_log: list = []
    broadcast_log: list = []
    validation_log: list = []
    accept_log: list = []
    send_log: list = []
    decided = [0]

    def on_decide(decision: Decision):
        decided[0] += 1
        decision_log.append(
            (decision.node, decision.phase_decided, decision.value, sim.delivered_count)
        )

    on_broadcast = None
    on_validate = None
    on_accept = None
    if cfg.layer == "rbcast":
        on_broadcast = lambda node, m: broadcast_log.append((node, m, sim.delivered_count))
        on_validate = lambda node, m: validation_log.append((node, m, sim.delivered_count))
    if cfg.layer == "purify":
        on_accept = lambda node, payload, src, label: accept_log.append(
            (node, payload, src, label, sim.delivered_count)
        )

    stacks = {}
    machines = []
    for u in honest:
        port = sim.port(u)
        stack = NodeStack(
            u,
            topo,
            n,
            cfg.f,
            port.send,
            layer=cfg.layer,
            input_bit=inputs[u],
            rng=node_rng(trial_seed, u, side_idx.get(u, 0)),
            on_decide=on_decide if cfg.layer == "agreement" else None,
            on_validate=on_validate,
            on_broadcast=on_broadcast,
            on_accept=on_accept,
            chain_memo=chain_memo,
        )
        handler = stack.on_envelope
        if h_events is not None:
            handler = _h_recording_handler(stack, u, n, side_idx, byz, h_events)
        stacks[u] = stack
        sim.register(u, handler)
        if stack.machine is not None:
            machines.append(stack.machine)

    ctx = TrialContext(topo, n, cfg.f, trial_seed, inputs, part, h_events, chain_memo)
    adv = build_adversary(cfg.adversary, ctx)
    if adv is not None:
        adv.attach(sim)

    starters = honest
    if cfg.layer == "rbcast" and cfg.broadcasters is not None:
        starters = tuple(u for u in honest if u in set(cfg.broadcasters))
    for u in starters:
        if cfg.layer == "purify":
            send_log.append((u, ProtocolMessage(u, 1, inputs[u]), INITIAL))
        sim.activate(u, stacks[u].start)
    if adv is not None:
        adv.start(sim)

    outcome = _run_loop(cfg, sim, decided, len(honest), machines)

    decisions = {u: stacks[u].decision for u in honest}
    phases = {u: p for (u, p, _v, _c) in decision_log}
    last_phase = max(phases.values()) if phases else None

    flags = {}
    if cfg.layer == "agreement":
        flags.update(audit_agreement(honest, inputs, decision_log))
    elif cfg.layer == "rbcast":
        flags.update(audit_rbcast(honest, broadcast_log, validation_log))
    else:
        flags.update(audit_purify(honest, send_log, accept_log))

    counters = _collect_counters(sim, stacks)

    result = TrialResult(
        index=trial_index,
        seed=trial_seed,
        n=n,
        honest=honest,
        inputs=inputs,
        outcome=outcome,
        event_count=sim.delivered_count,
        decisions=decisions,
        decision_phases=phases,
        phases_to_last_decision=last_phase,
        flags=flags,
        counters=counters,
        decision_log=decision_log,
        broadcast_log=broadcast_log,
        validation_log=validation_log,
        accept_log=accept_log,
        send_log=send_log,
    )
    if isinstance(adv, SplitBrainAdversary):
        result.sim_decisions = {
            role: (d.value, d.phase_decided) for role, d in sorted(adv.decisions.items())
        }
    if h_events is not None:
        result.h_events = h_events
    if cfg.record_trace:
        result.trace_lines = sim.trace_lines()
    return result


def _h_recording_handler(stack, u, n, side_idx, byz, h_events):
    my_idx = side_idx[u]

    def handler(sender, payload):
        if sender != u:
            s_idx = side_idx[sender] if sender not in byz else my_idx
            h_events.append((sender + s_idx * n, u + my_idx * n, payload))
        stack.on_envelope(sender, payload)

    return handler


def _run_loop(cfg, sim, decided, target, machines) -> str:
    max_events = cfg.max_events
    deliver = sim.deliver_next
    if cfg.layer != "agreement":
        while sim.delivered_count < max_events:
            if deliver() is None:
                return "quiescent"
        return "budget_exhausted"
    while True:
        if decided[0] == target:
            return "decided"
        if sim.delivered_count >= max_events:
            return "budget_exhausted"
        if deliver() is None:
            return "stalled"
        if (sim.delivered_count & 0x3FFF) == 0:
            if any(m.phase > cfg.max_phases for m in machines):
                return "phase_budget_exhausted"


def _collect_counters(sim, stacks) -> dict:
    totals = {
        "sent": sim.sent_count,
        "delivered": sim.delivered_count,
        "stored": 0,
        "accepted": 0,
        "loop_discards": 0,
        "invalid_discards": 0,
        "duplicate_discards": 0,
        "cap_skips": 0,
        "disjoint_searches": 0,
    }
    for stack in stacks.values():
        m = stack.purify.metrics
        totals["stored"] += m.stored
        totals["accepted"] += m.accepted
        totals["loop_discards"] += m.loop_discards
        totals["invalid_discards"] += m.invalid_discards
        totals["duplicate_discards"] += m.duplicate_discards
        totals["cap_skips"] += m.cap_skips
        totals["disjoint_searches"] += m.searches
    return totals


# ---------------------------------------------------------------------------
# Double-cover (execution on H) runner.
# ---------------------------------------------------------------------------


def _build_h_stacks(topo_g, part, h, f, trial_seed, sim, on_decide, chain_memo):
    """Stacks for a run on H: each physical node p hosts logical node p mod n
    with copy index p // n, translating ids at the transport boundary."""
    n = topo_g.n
    phys_map = {}  # physical -> {logical neighbor -> physical neighbor}
    for p in range(2 * n):
        mapping = {}
        for q in h.neighbors(p):
            logical = q % n
            if logical in mapping:
                raise GraphError("double cover produced duplicate logical neighbors")
            mapping[logical] = q
        phys_map[p] = mapping

    stacks = {}
    for p in range(2 * n):
        u, i = p % n, p // n
        port = sim.port(p)

        def make_send(p, u, port):
            mapping = phys_map[p]

            def send(receiver, env):
                if receiver == u:
                    port.send(p, env)
                    return
                target = mapping.get(receiver)
                if target is None:
                    raise GraphError(f"no physical neighbor for logical {receiver}")
                port.send(target, env)

            return send

        stack = NodeStack(
            u,
            topo_g,
            n,
            f,
            make_send(p, u, port),
            layer="agreement",
            input_bit=i,
            rng=node_rng(trial_seed, u, i),
            on_decide=on_decide(p),
            chain_memo=chain_memo,
        )

        def make_handler(stack):
            return lambda sender, payload: stack.on_envelope(sender % n, payload)

        sim.register(p, make_handler(stack))
        stacks[p] = stack
    return stacks


def _run_double_cover_trial(cfg, trial_index, trial_seed, topo_g, part) -> TrialResult:
    n = topo_g.n
    chain_memo: dict = {}
    decision_log: list = []
    decided = [0]

    def on_decide(p):
        def hook(decision: Decision):
            decided[0] += 1
            decision_log.append((p, decision.phase_decided, decision.value, sim.delivered_count))

        return hook

    policy = make_policy(
        cfg.scheduler["kind"],
        seed=derive_seed(trial_seed, "sched"),
        bound=cfg.scheduler.get("bound"),
    )
    h = build_double_cover(topo_g, part)
    sim = Simulator(h, policy, record_trace=cfg.record_trace)
    stacks = _build_h_stacks(topo_g, part, h, cfg.f, trial_seed, sim, on_decide, chain_memo)

    for p in sorted(stacks):
        sim.activate(p, stacks[p].start)

    machines = [s.machine for s in stacks.values()]
    outcome = _run_loop(cfg, sim, decided, len(stacks), machines)

    decisions = {p: stacks[p].decision for p in sorted(stacks)}
    phases = {p: ph for (p, ph, _v, _c) in decision_log}
    # Copy consistency: X/Y/R deciders must match their copy index. The T
    # copies carry no guarantee (they mirror the Byzantine role of the cut
    # construction and can be captured by the opposite enclave).
    copy_violation = any(
        v is not None and v != (p // n) and (p % n) not in part.t
        for p, v in decisions.items()
    )
    flags = {
        "copy_value_violation": copy_violation,
        "termination_violation": any(v is None for v in decisions.values()),
    }
    result = TrialResult(
        index=trial_index,
        seed=trial_seed,
        n=2 * n,
        honest=tuple(range(2 * n)),
        inputs=tuple(p // n for p in range(2 * n)),
        outcome=outcome,
        event_count=sim.delivered_count,
        decisions=decisions,
        decision_phases=phases,
        phases_to_last_decision=max(phases.values()) if phases else None,
        flags=flags,
        counters=_collect_counters(sim, stacks),
        decision_log=decision_log,
    )
    if cfg.record_trace:
        result.trace_lines = sim.trace_lines()
    return result


# ---------------------------------------------------------------------------
# Split-brain vs double-cover replay check.
# ---------------------------------------------------------------------------


class ReplayPolicy:
    """Replays a recorded delivery order on the double cover; any deviation
    between the recorded composite execution and the live H run raises."""

    kind = "replay"

    def __init__(self, events):
        self._events = events
        self._next = 0
        self._channels: dict[tuple[int, int], deque] = {}
        self._count = 0

    def pending(self) -> int:
        return self._count

    def enqueue(self, sender, receiver, seq, payload):
        self._channels.setdefault((sender, receiver), deque()).append((seq, payload))
        self._count += 1

    def dequeue(self):
        if self._next >= len(self._events):
            return None
        sender, receiver, payload = self._events[self._next]
        self._next += 1
        ch = self._channels.get((sender, receiver))
        if not ch:
            raise ReplayMismatch(
                f"recorded delivery {sender}->{receiver} has no pending envelope"
            )
        seq, live = ch.popleft()
        self._count -= 1
        if live != payload:
            raise ReplayMismatch(
                f"payload mismatch on {sender}->{receiver}: {live!r} != {payload!r}"
            )
        return sender, receiver, seq, live


def verify_split_brain_isomorphism(cfg: RunConfig, trial_index: int = 0) -> dict:
    """Run E3 (split-brain on G), then replay its composite H-trace as a direct
    all-honest run on H with matched seeds; assert both unfold identically."""
    cfg_e3 = RunConfig(**{**cfg.__dict__, "record_h_events": True})
    e3 = run_trial(cfg_e3, trial_index)

    topo, part = resolve_topology(cfg)
    n = topo.n
    side_idx = {u: 0 for u in part.x}
    side_idx.update({u: 1 for u in part.y | part.t})
    composite = {}
    for u in e3.honest:
        if e3.decisions[u] is not None:
            composite[u + side_idx[u] * n] = (
                e3.decisions[u],
                e3.decision_phases[u],
            )
    for (u, i), d in e3.sim_decisions.items():
        composite[u + i * n] = d

    trial_seed = derive_seed(cfg.seed, "trial", trial_index)
    chain_memo: dict = {}
    decisions_h = {}

    def on_decide(p):
        def hook(decision: Decision):
            decisions_h[p] = (decision.value, decision.phase_decided)

        return hook

    policy = ReplayPolicy(e3.h_events)
    h = build_double_cover(topo, part)
    sim = Simulator(h, policy)
    stacks = _build_h_stacks(topo, part, h, cfg.f, trial_seed, sim, on_decide, chain_memo)
    for p in sorted(stacks):
        sim.activate(p, stacks[p].start)
    while sim.step() is not None:
        pass
    if policy.pending() != 0:
        raise ReplayMismatch(
            f"{policy.pending()} live envelopes never appeared in the composite trace"
        )
    if decisions_h != composite:
        raise ReplayMismatch(
            f"decision mismatch: H run {decisions_h} vs composite {composite}"
        )
    return {
        "events_replayed": len(e3.h_events),
        "decisions": dict(sorted(decisions_h.items())),
        "e3_outcome": e3.outcome,
        "e3_flags": e3.flags,
    }


# ---------------------------------------------------------------------------
# Suites and reports.
# ---------------------------------------------------------------------------


@dataclass
class SuiteReport:
    config_seed: int
    trials: int
    results: list
    aggregate: dict


def _trial_worker(args):
    cfg, index = args
    return run_trial(cfg, index)


def run_suite(cfg: RunConfig, trials: int | None = None, parallel: bool = False) -> SuiteReport:
    count = trials if trials is not None else cfg.trials
    if count < 1:
        raise ConfigError("trials: must be >= 1")
    if parallel:
        jobs = [(cfg, i) for i in range(count)]
        with multiprocessing.Pool(processes=2) as pool:
            results = pool.map(_trial_worker, jobs)
    else:
        results = [run_trial(cfg, i) for i in range(count)]
    return SuiteReport(
        config_seed=cfg.seed,
        trials=count,
        results=results,
        aggregate=aggregate_results(results),
    )


def aggregate_results(results) -> dict:
    decided = [r for r in results if all(v is not None for v in r.decisions.values())]
    violation_counts: dict[str, int] = {}
    for r in results:
        for flag, hit in r.flags.items():
            if hit:
                violation_counts[flag] = violation_counts.get(flag, 0) + 1
    phases = [r.phases_to_last_decision for r in decided if r.phases_to_last_decision is not None]
    return {
        "trials": len(results),
        "decided_trials": len(decided),
        "decision_rate": (len(decided) / len(results)) if results else 0.0,
        "mean_phases": (sum(phases) / len(phases)) if phases else None,
        "total_events": sum(r.event_count for r in results),
        "violations": dict(sorted(violation_counts.items())),
        "any_violation": any(r.violated for r in results),
    }


def trial_record(r: TrialResult) -> dict:
    return {
        "record": "trial",
        "index": r.index,
        "outcome": r.outcome,
        "events": r.event_count,
        "inputs": list(r.inputs),
        "decisions": {str(k): v for k, v in sorted(r.decisions.items())},
        "decision_phases": {str(k): v for k, v in sorted(r.decision_phases.items())},
        "phases_to_last_decision": r.phases_to_last_decision,
        "flags": dict(sorted(r.flags.items())),
        "counters": dict(sorted(r.counters.items())),
    }


def suite_record(report: SuiteReport) -> dict:
    return {"record": "aggregate", **report.aggregate}


def render_jsonlines(report: SuiteReport) -> str:
    lines = [json.dumps(trial_record(r), sort_keys=True) for r in report.results]
    lines.append(json.dumps(suite_record(report), sort_keys=True))
    return "\n".join(lines) + "\n"


def render_text(report: SuiteReport) -> str:
    lines = []
    for r in report.results:
        decs = " ".join(
            f"{u}:{'-' if v is None else v}" for u, v in sorted(r.decisions.items())
        )
        flagged = ",".join(k for k, v in sorted(r.flags.items()) if v) or "-"
        lines.append(
            f"trial {r.index}: outcome={r.outcome} events={r.event_count} "
            f"decisions[{decs}] flags={flagged}"
        )
    agg = report.aggregate
    lines.append(
        f"aggregate: trials={agg['trials']} decided={agg['decided_trials']} "
        f"decision_rate={agg['decision_rate']:.3f} mean_phases={agg['mean_phases']} "
        f"violations={agg['violations'] or '-'}"
    )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Scenario library.
# ---------------------------------------------------------------------------

_CUT_TOPOLOGY = {"kind": "cut_partition", "x": 2, "y": 2, "r": 1, "t": 1, "density": 1.0}

SCENARIO_NAMES = ("E1", "E2", "E3", "E4", "purify_positive", "purify_negative")


def scenario(name: str, seed: int = 0, trials: int = 1) -> RunConfig:
    """Named experiment setups for the tight-connectivity constructions."""
    base = dict(topology=dict(_CUT_TOPOLOGY), f=1, seed=seed, trials=trials)
    if name == "E1":
        cfg = RunConfig(
            **base,
            inputs="all0",
            adversary=AdversarySpec(nodes=(5,), strategy="honest_mimic", options={"input": 0}),
            scheduler={"kind": "random"},
        )
    elif name == "E2":
        cfg = RunConfig(
            **base,
            inputs="all1",
            adversary=AdversarySpec(nodes=(5,), strategy="honest_mimic", options={"input": 1}),
            scheduler={"kind": "random"},
        )
    elif name == "E3":
        cfg = RunConfig(
            **base,
            inputs=(0, 0, 1, 1, 0, 1),
            adversary=AdversarySpec(nodes=(4,), strategy="split_brain"),
            scheduler={"kind": "random"},
        )
    elif name == "E4":
        cfg = RunConfig(
            **base,
            inputs="all0",  # per-copy inputs are assigned by the H runner
            double_cover=True,
            scheduler={"kind": "random"},
        )
    elif name == "purify_positive":
        cfg = RunConfig(
            topology={"kind": "wheel", "n": 6},
            f=1,
            seed=seed,
            trials=trials,
            inputs="split",
            adversary=AdversarySpec(nodes=(1,), strategy="drop_relay"),
            scheduler={"kind": "random"},
            layer="purify",
        )
    elif name == "purify_negative":
        cfg = RunConfig(
            **base,
            inputs="split",
            adversary=AdversarySpec(nodes=(4,), strategy="drop_relay"),
            scheduler={"kind": "random"},
            layer="purify",
        )
    else:
        raise ConfigError(f"scenario: unknown name {name!r}; choose from {SCENARIO_NAMES}")
    validate_config(cfg)
    return cfg
