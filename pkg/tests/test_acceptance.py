"""Acceptance suite: one test per criterion, each printing a PASS line with
its observed numbers. Tolerances are exact unless a rate is stated.
"""
from __future__ import annotations

import itertools
import json
import random
import time

import pytest

from byznet.adversary import AdversarySpec
from byznet.graph import Topology, complete_graph, vertex_connectivity
from byznet.harness import (
    RunConfig,
    render_jsonlines,
    run_suite,
    run_trial,
    scenario,
    trial_record,
    verify_split_brain_isomorphism,
)
from conftest import K7_MINUS_MATCHING_EDGES
from oracles import brute_vertex_connectivity

SCHEDULERS = ("fifo", "random", "adversarial")
RELAY_STRATEGIES = ("drop_relay", "corrupt_relay", "forge_source")

WHEEL_FIXTURES = tuple({"kind": "wheel", "n": n} for n in (4, 5, 6, 7))


def k7_fixture():
    return {"file": str(__file__).replace("tests/test_acceptance.py", "graphs/k7_minus_matching.txt")}


def announce(num: int, detail: str, elapsed: float) -> None:
    print(f"\nACCEPTANCE {num} PASS: {detail} [{elapsed:.1f}s]", flush=True)


# -- criterion 1 ------------------------------------------------------------------


def test_criterion_1_connectivity_oracle_equivalence():
    start = time.time()
    rng = random.Random(20240817)
    checked = 0
    for _ in range(200):
        n = rng.randint(2, 8)
        p = rng.uniform(0.15, 0.95)
        edges = [
            (u, v)
            for u in range(n)
            for v in range(u + 1, n)
            if rng.random() < p
        ]
        g = Topology.from_edges(n, edges)
        assert vertex_connectivity(g) == brute_vertex_connectivity(g)
        checked += 1
    elapsed = time.time() - start
    assert checked == 200
    assert elapsed < 30.0
    announce(1, f"max-flow connectivity == brute force on {checked} random graphs (n<=8)", elapsed)


# -- criteria 2 and 3: the fixture sweep --------------------------------------------


def sweep_configs(layer: str):
    """Every Byzantine subset of size f, relay strategies x schedulers x 3 seeds."""
    fixtures = [(topo, 1) for topo in WHEEL_FIXTURES] + [(k7_fixture(), 2)]
    for topo, f in fixtures:
        n = topo.get("n", 7)
        for byz in itertools.combinations(range(n), f):
            honest = [u for u in range(n) if u not in byz]
            for strategy in RELAY_STRATEGIES:
                for sched_i, sched in enumerate(SCHEDULERS):
                    for seed in range(3):
                        broadcasters = None
                        if layer == "rbcast" and f == 2:
                            # rotate a single broadcaster to keep the flooding
                            # volume inside the stated wall-clock budget
                            pick = honest[(byz[0] + sched_i + seed) % len(honest)]
                            broadcasters = (pick,)
                        yield RunConfig(
                            topology=dict(topo),
                            f=f,
                            inputs="split",
                            adversary=AdversarySpec(nodes=byz, strategy=strategy),
                            scheduler={"kind": sched},
                            seed=1000 * seed + 7 * byz[0] + sched_i,
                            layer=layer,
                            broadcasters=broadcasters,
                        )


@pytest.mark.slow
def test_criterion_2_purify_validity_and_integrity():
    start = time.time()
    trials = 0
    for cfg in sweep_configs("purify"):
        result = run_trial(cfg, 0)
        assert result.outcome == "quiescent"
        assert not result.flags["purify_validity_violation"], (cfg.adversary, cfg.scheduler)
        assert not result.flags["purify_integrity_violation"], (cfg.adversary, cfg.scheduler)
        assert not result.flags["purify_duplication_violation"]
        assert result.counters["cap_skips"] == 0
        trials += 1
    elapsed = time.time() - start
    assert elapsed < 300.0
    announce(2, f"purify validity/integrity exact over {trials} exhaustive-subset trials", elapsed)


@pytest.mark.slow
def test_criterion_3_broadcast_five_properties():
    start = time.time()
    trials = 0
    for cfg in sweep_configs("rbcast"):
        result = run_trial(cfg, 0)
        assert result.outcome == "quiescent"
        for flag, hit in result.flags.items():
            assert not hit, (flag, cfg.adversary, cfg.scheduler)
        trials += 1
    elapsed = time.time() - start
    assert elapsed < 300.0
    announce(3, f"all five broadcast properties held in {trials}/{trials} trials", elapsed)


# -- criterion 4 --------------------------------------------------------------------


def validity_configs():
    small = [({"kind": "wheel", "n": n}, 1) for n in (4, 5, 6)]
    for topo, f in small:
        n = topo["n"]
        for strategy in ("none", "crash", "drop_relay", "corrupt_relay", "forge_source"):
            adv = (
                AdversarySpec()
                if strategy == "none"
                else AdversarySpec(nodes=(n - 1,), strategy=strategy)
            )
            for inputs in ("all0", "all1"):
                for sched in SCHEDULERS:
                    for seed in range(2):
                        yield RunConfig(
                            topology=dict(topo),
                            f=f,
                            inputs=inputs,
                            adversary=adv,
                            scheduler={"kind": sched},
                            seed=31 * seed + n,
                        )
    for strategy in ("crash", "corrupt_relay", "forge_source"):
        for inputs in ("all0", "all1"):
            for sched in SCHEDULERS:
                yield RunConfig(
                    topology={"kind": "wheel", "n": 7},
                    f=1,
                    inputs=inputs,
                    adversary=AdversarySpec(nodes=(3,), strategy=strategy),
                    scheduler={"kind": sched},
                    seed=17,
                )
    for strategy in ("crash", "drop_relay"):
        for inputs in ("all0", "all1"):
            for seed in range(2):
                yield RunConfig(
                    topology=k7_fixture(),
                    f=2,
                    inputs=inputs,
                    adversary=AdversarySpec(nodes=(1, 4), strategy=strategy),
                    scheduler={"kind": "random"},
                    seed=seed,
                    max_events=50_000_000,
                )


@pytest.mark.slow
def test_criterion_4_agreement_validity_phase0():
    start = time.time()
    trials = 0
    for cfg in validity_configs():
        result = run_trial(cfg, 0)
        expected = 0 if cfg.inputs == "all0" else 1
        assert result.outcome == "decided", (cfg.topology, cfg.adversary)
        assert set(result.decisions.values()) == {expected}
        assert set(result.decision_phases.values()) == {0}, (cfg.topology, cfg.adversary)
        trials += 1
    elapsed = time.time() - start
    assert trials >= 200
    announce(4, f"all-equal inputs decided in phase 0 in {trials}/{trials} trials", elapsed)


# -- criterion 5 ---------------------------------------------------------------------


def safety_configs():
    plans = [
        ({"kind": "wheel", "n": 4}, 1, (3,), 12),
        ({"kind": "wheel", "n": 5}, 1, (2,), 12),
        ({"kind": "wheel", "n": 6}, 1, (0,), 8),  # Byzantine hub
        ({"kind": "wheel", "n": 6}, 1, (4,), 4),
    ]
    for topo, f, byz, seeds in plans:
        for strategy in ("crash", "drop_relay", "corrupt_relay", "forge_source", "equivocate"):
            for sched in SCHEDULERS:
                for seed in range(seeds if strategy == "equivocate" else max(2, seeds // 2)):
                    yield RunConfig(
                        topology=dict(topo),
                        f=f,
                        inputs="random",
                        adversary=AdversarySpec(nodes=byz, strategy=strategy),
                        scheduler={"kind": sched},
                        seed=seed,
                        max_phases=120,
                        max_events=50_000_000,
                    )
    for strategy in ("crash", "equivocate"):
        for sched in ("fifo", "random"):
            for seed in range(4):
                yield RunConfig(
                    topology=k7_fixture(),
                    f=2,
                    inputs="random",
                    adversary=AdversarySpec(nodes=(2, 6), strategy=strategy),
                    scheduler={"kind": sched},
                    seed=seed,
                    max_phases=120,
                    max_events=300_000_000,
                )


@pytest.mark.slow
def test_criterion_5_agreement_safety_and_phase_lag():
    start = time.time()
    trials = 0
    for cfg in safety_configs():
        for trial in range(2):
            result = run_trial(cfg, trial)
            assert not result.flags["agreement_violation"], (cfg.topology, cfg.adversary)
            assert not result.flags["termination_violation"], (cfg.topology, cfg.adversary)
            assert not result.flags["phase_lag_violation"], (cfg.topology, cfg.adversary)
            trials += 1
    elapsed = time.time() - start
    assert trials >= 500
    announce(
        5,
        f"zero disagreement and one-phase-lag held in {trials}/{trials} mixed-input trials",
        elapsed,
    )


# -- criterion 6 -----------------------------------------------------------------------


def undecided_curve(results, max_phase):
    def undecided_after(p):
        bad = 0
        for r in results:
            done = all(v is not None for v in r.decisions.values())
            if not done or r.phases_to_last_decision > p:
                bad += 1
        return bad / len(results)

    return [undecided_after(p) for p in range(max_phase + 1)]


@pytest.mark.slow
def test_criterion_6_probabilistic_termination():
    start = time.time()
    summaries = []

    plans = [
        (
            "n=5 f=1",
            [
                RunConfig(
                    topology={"kind": "wheel", "n": 5},
                    f=1,
                    inputs="random",
                    adversary=AdversarySpec(nodes=(2,), strategy="equivocate"),
                    scheduler={"kind": "random"},
                    seed=61,
                    max_phases=80,
                    max_events=100_000_000,
                    trials=500,
                )
            ],
        ),
        (
            "n=7 f=2",
            [
                RunConfig(
                    topology=k7_fixture(),
                    f=2,
                    inputs="random",
                    adversary=AdversarySpec(nodes=(3, 5), strategy="equivocate"),
                    scheduler={"kind": "fifo"},
                    seed=62,
                    max_phases=80,
                    max_events=300_000_000,
                    trials=300,
                ),
                RunConfig(
                    topology=k7_fixture(),
                    f=2,
                    inputs="random",
                    adversary=AdversarySpec(nodes=(3, 5), strategy="equivocate"),
                    scheduler={"kind": "random"},
                    seed=63,
                    max_phases=80,
                    max_events=300_000_000,
                    trials=200,
                ),
            ],
        ),
    ]

    for label, cfgs in plans:
        results = []
        for cfg in cfgs:
            results.extend(run_suite(cfg).results)
        assert len(results) == 500
        within = sum(
            1
            for r in results
            if all(v is not None for v in r.decisions.values())
            and r.phases_to_last_decision <= 60
        )
        rate = within / len(results)
        assert rate >= 0.99, f"{label}: only {rate:.3f} decided within 60 phases"
        curve = undecided_curve(results, 80)
        assert all(curve[p + 1] <= curve[p] for p in range(80))
        phases = [r.phases_to_last_decision for r in results if r.phases_to_last_decision is not None]
        summaries.append(
            f"{label}: {rate * 100:.1f}% within 60 phases (max observed {max(phases)})"
        )
    announce(6, "; ".join(summaries), time.time() - start)


# -- criterion 7 -------------------------------------------------------------------------


def test_criterion_7_purify_negative_tight_connectivity():
    start = time.time()
    cfg = scenario("purify_negative", seed=71)
    trials = 25
    for trial in range(trials):
        result = run_trial(cfg, trial)
        assert result.outcome == "quiescent"
        assert result.flags["purify_validity_violation"]
        accepted = {(w, src) for (w, _p, src, _l, _c) in result.accept_log}
        for x in (0, 1):
            for y in (2, 3):
                assert (y, x) not in accepted and (x, y) not in accepted
    announce(
        7,
        f"cross-cut acceptance never happened before quiescence in {trials}/{trials} trials",
        time.time() - start,
    )


# -- criterion 8 -------------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_8_impossibility_harness():
    start = time.time()
    for trial in range(20):
        r1 = run_trial(scenario("E1", seed=81), trial)
        assert r1.outcome == "decided" and set(r1.decisions.values()) == {0}
        r2 = run_trial(scenario("E2", seed=82), trial)
        assert r2.outcome == "decided" and set(r2.decisions.values()) == {1}

    cfg3 = scenario("E3", seed=83)
    violations = 0
    for trial in range(100):
        r3 = run_trial(cfg3, trial)
        if r3.flags["agreement_violation"] or r3.flags["termination_violation"]:
            violations += 1
    assert violations == 100

    replayed = 0
    for trial in range(3):
        outcome = verify_split_brain_isomorphism(cfg3, trial)
        replayed += outcome["events_replayed"]

    announce(
        8,
        "E1 all-0, E2 all-1, E3 violated agreement-or-termination in 100/100 trials, "
        f"E3 composite replayed exactly as E4 on H ({replayed} events)",
        time.time() - start,
    )


# -- criterion 9 -------------------------------------------------------------------------


def test_criterion_9_determinism():
    start = time.time()
    probes = [
        RunConfig(
            topology={"kind": "wheel", "n": 5},
            f=1,
            inputs="random",
            adversary=AdversarySpec(nodes=(1,), strategy="equivocate"),
            scheduler={"kind": kind},
            seed=91,
            record_trace=True,
        )
        for kind in SCHEDULERS
    ]
    probes.append(
        RunConfig(
            topology={"kind": "wheel", "n": 6},
            f=1,
            inputs="split",
            adversary=AdversarySpec(nodes=(2,), strategy="forge_source"),
            scheduler={"kind": "random"},
            seed=92,
            layer="purify",
            record_trace=True,
        )
    )
    probes.append(
        RunConfig(**{**scenario("E3", seed=93).__dict__, "record_trace": True})
    )
    for cfg in probes:
        a = run_trial(cfg, 0)
        b = run_trial(cfg, 0)
        assert a.trace_lines == b.trace_lines
        assert json.dumps(trial_record(a), sort_keys=True) == json.dumps(
            trial_record(b), sort_keys=True
        )

    suite_cfg = RunConfig(
        topology={"kind": "wheel", "n": 5},
        f=1,
        inputs="random",
        adversary=AdversarySpec(nodes=(4,), strategy="crash"),
        scheduler={"kind": "random"},
        seed=94,
        trials=6,
    )
    serial = render_jsonlines(run_suite(suite_cfg, parallel=False))
    parallel = render_jsonlines(run_suite(suite_cfg, parallel=True))
    assert serial == parallel

    announce(
        9,
        "byte-identical traces and reports on reruns; serial == parallel suites",
        time.time() - start,
    )
