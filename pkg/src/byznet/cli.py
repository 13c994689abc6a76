"""Command-line interface.

Verbs: `run` (single config trial), `suite` (repeated trials with aggregate),
`scenario <name>`, `connectivity <graphfile>`, `trace <config>`.
Exit codes: 0 all asserted properties held, 1 property violation detected
(inverted by --expect-violation), 2 configuration error.
"""
from __future__ import annotations

import argparse
import sys

from .graph import GraphError, load_topology, local_connectivity, max_disjoint_paths, vertex_connectivity
from .harness import (
    ConfigError,
    RunConfig,
    SCENARIO_NAMES,
    SuiteReport,
    load_config,
    render_jsonlines,
    render_text,
    run_suite,
    run_trial,
    scenario,
)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2


def _add_common(parser):
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--trials", type=int, default=None, help="override trial count")
    parser.add_argument(
        "--scheduler", choices=["fifo", "random", "adversarial"], default=None
    )
    parser.add_argument("--out", default=None, help="write the report to this path")
    parser.add_argument("--format", choices=["text", "jsonlines"], default="text")
    parser.add_argument(
        "--expect-violation",
        action="store_true",
        help="negative scenario: exit 0 iff a property violation was detected",
    )
    parser.add_argument("--parallel", action="store_true", help="run trials in a pool")


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    if args.scheduler is not None:
        cfg.scheduler = {"kind": args.scheduler}
    return cfg


def _emit(report: SuiteReport, args) -> None:
    text = render_jsonlines(report) if args.format == "jsonlines" else render_text(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _verdict(report: SuiteReport, args) -> int:
    violated = report.aggregate["any_violation"]
    if args.expect_violation:
        return EXIT_OK if violated else EXIT_VIOLATION
    return EXIT_VIOLATION if violated else EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="byznet")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run a single trial from a config file")
    p_run.add_argument("config")
    _add_common(p_run)

    p_suite = sub.add_parser("suite", help="run the config's trial suite")
    p_suite.add_argument("config")
    _add_common(p_suite)

    p_scen = sub.add_parser("scenario", help="run a named scenario")
    p_scen.add_argument("name", choices=list(SCENARIO_NAMES))
    _add_common(p_scen)

    p_conn = sub.add_parser(
        "connectivity", help="print vertex connectivity and a disjoint-path witness"
    )
    p_conn.add_argument("graphfile")

    p_trace = sub.add_parser("trace", help="emit the event trace of one trial")
    p_trace.add_argument("config")
    _add_common(p_trace)

    args = parser.parse_args(argv)
    try:
        if args.verb == "connectivity":
            return _cmd_connectivity(args)
        if args.verb == "run":
            cfg = _apply_overrides(load_config(args.config), args)
            report = run_suite(cfg, trials=1, parallel=False)
            _emit(report, args)
            return _verdict(report, args)
        if args.verb == "suite":
            cfg = _apply_overrides(load_config(args.config), args)
            report = run_suite(cfg, parallel=args.parallel)
            _emit(report, args)
            return _verdict(report, args)
        if args.verb == "scenario":
            cfg = scenario(args.name, seed=args.seed or 0)
            cfg = _apply_overrides(cfg, args)
            report = run_suite(cfg, parallel=args.parallel)
            _emit(report, args)
            return _verdict(report, args)
        if args.verb == "trace":
            cfg = _apply_overrides(load_config(args.config), args)
            cfg.record_trace = True
            result = run_trial(cfg, 0)
            text = "\n".join(result.trace_lines) + "\n"
            if args.out:
                with open(args.out, "w", encoding="utf-8") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
    except (ConfigError, GraphError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


def _cmd_connectivity(args) -> int:
    g = load_topology(args.graphfile)
    k = vertex_connectivity(g)
    print(f"n={g.n} m={g.edge_count}")
    print(f"vertex_connectivity={k}")
    if g.n < 2:
        return EXIT_OK
    best_pair = None
    best = None
    for u in range(g.n):
        for v in range(u + 1, g.n):
            lam = local_connectivity(g, u, v)
            if best is None or lam < best:
                best, best_pair = lam, (u, v)
    u, v = best_pair
    count, paths = max_disjoint_paths(g, u, v)
    print(f"witness_pair={u},{v} disjoint_paths={count}")
    for path in paths:
        print("  " + "-".join(str(x) for x in path))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
