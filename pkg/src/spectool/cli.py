"""Command-line entry point: mine, score, simulate, check-policy.

All outputs are machine-readable JSON/CSV and deterministic for a given
input set and seed. Exit codes: 0 success, 1 usage or I/O failure, 2 an
invariant assertion fired during simulation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import Any, Sequence

from .events import ingest_trace
from .mining import (
    MatchRelation,
    MiningConfig,
    PatternPool,
    PoolFormatError,
    load_pool,
    mine_pool,
    save_pool,
)
from .policy import PolicyParseError, parse_policy, policy_to_dict
from .prediction import score_accuracy
from .reporting import (
    compare_runs,
    write_breakdown,
    write_latency_cdf,
    write_speedup_cdf,
)
from .simulation import BASELINE, SPECULATIVE, SimulationError
from .workloads import build_engine, load_arrivals, load_workload

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVARIANT = 2

LOG_ENV_VAR = "SPECTOOL_LOG"


@dataclass
class ExperimentConfig:
    """Resolved simulate-command configuration."""

    workload_path: str
    arrivals_path: str
    pool_path: str | None
    policy_path: str | None
    out_dir: str
    mode: str
    seed: int
    r_total: int
    spec_budget: int
    epoch_ms: float
    window: int
    max_candidates: int | None

    def validate(self) -> None:
        for path in (self.workload_path, self.arrivals_path, self.pool_path,
                     self.policy_path):
            if path is not None and not os.path.exists(path):
                raise FileNotFoundError(path)
        os.makedirs(self.out_dir, exist_ok=True)


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str):  # noqa: A003 - argparse API
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="spectool",
                     description="Speculative tool execution experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_mine = sub.add_parser("mine", help="mine a pattern pool from a JSONL trace")
    p_mine.add_argument("--trace", required=True)
    p_mine.add_argument("--out", required=True)
    p_mine.add_argument("--k", type=int, default=3)
    p_mine.add_argument("--sigma", type=int, default=5)
    p_mine.add_argument("--tau", type=float, default=0.5)
    p_mine.add_argument("--validation-fraction", type=float, default=0.9)
    p_mine.add_argument("--match-relation", default=MatchRelation.ANCHORED_SUBSEQUENCE.value,
                        choices=[r.value for r in MatchRelation])
    p_mine.add_argument("--inactivity-threshold-s", type=float, default=300.0)

    p_score = sub.add_parser("score", help="score a pool on a held-out trace")
    p_score.add_argument("--pool", required=True)
    p_score.add_argument("--trace", required=True)
    p_score.add_argument("--out")
    p_score.add_argument("--window", type=int, default=16)
    p_score.add_argument("--inactivity-threshold-s", type=float, default=300.0)

    p_sim = sub.add_parser("simulate", help="run the discrete-event simulation")
    p_sim.add_argument("--workload", required=True)
    p_sim.add_argument("--arrivals", required=True)
    p_sim.add_argument("--pool")
    p_sim.add_argument("--policy")
    p_sim.add_argument("--resources", default="4,4", metavar="R,B",
                       help="total capacity and speculation budget")
    p_sim.add_argument("--epoch-ms", type=float, default=1000.0)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--mode", choices=["baseline", "spec", "both"], default="both")
    p_sim.add_argument("--window", type=int, default=16)
    p_sim.add_argument("--max-candidates", type=int)
    p_sim.add_argument("--out-dir", default="out")

    p_chk = sub.add_parser("check-policy", help="validate and echo a policy file")
    p_chk.add_argument("--policy", required=True)
    return parser


def _print_json(obj: Any, out_path: str | None = None) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_mine(args: argparse.Namespace) -> int:
    try:
        with open(args.trace, "r", encoding="utf-8") as fh:
            ingest = ingest_trace(fh, inactivity_threshold_ms=args.inactivity_threshold_s * 1000.0)
    except OSError as exc:
        print(f"spectool mine: cannot read trace: {exc}", file=sys.stderr)
        return EXIT_USAGE
    cfg = MiningConfig(k=args.k, sigma=args.sigma, tau=args.tau,
                       validation_fraction=args.validation_fraction,
                       match_relation=MatchRelation(args.match_relation))
    pool = mine_pool(ingest.sessions, cfg) if ingest.sessions \
        else PatternPool(config=cfg, patterns=())
    save_pool(pool, args.out)

    confidence_hist: dict[str, int] = {}
    support_hist: dict[str, int] = {}
    for pattern in pool.patterns:
        bucket = f"{min(int(pattern.p * 10), 9) / 10:.1f}"
        confidence_hist[bucket] = confidence_hist.get(bucket, 0) + 1
        support_hist[str(pattern.support)] = support_hist.get(str(pattern.support), 0) + 1
    _print_json({
        "patterns": len(pool),
        "targets": sorted({p.target for p in pool.patterns}),
        "confidence_histogram": confidence_hist,
        "support_histogram": support_hist,
        "match_relation": cfg.match_relation.value,
        "ingest": {"sessions": len(ingest.sessions), "errors": len(ingest.errors),
                   "reordered_sessions": ingest.reordered_sessions},
    })
    return EXIT_OK


def _cmd_score(args: argparse.Namespace) -> int:
    try:
        pool = load_pool(args.pool)
        with open(args.trace, "r", encoding="utf-8") as fh:
            ingest = ingest_trace(fh, inactivity_threshold_ms=args.inactivity_threshold_s * 1000.0)
    except (OSError, PoolFormatError) as exc:
        print(f"spectool score: {exc}", file=sys.stderr)
        return EXIT_USAGE
    trace_tools = {e.tool_type for s in ingest.sessions for e in s.tool_events()}
    pool_tools = {p.target for p in pool.patterns} | \
        {s.tool_type for p in pool.patterns for s in p.context}
    unknown = sorted(pool_tools - trace_tools)
    if unknown:
        print(f"spectool score: warning: pool references tools absent from the "
              f"trace: {', '.join(unknown)}", file=sys.stderr)
    report = score_accuracy(ingest.sessions, pool, window_capacity=args.window)
    _print_json(report.to_json(), args.out)
    return EXIT_OK


def _parse_resources(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError("expected R,B")
    return int(parts[0]), int(parts[1])


def _cmd_simulate(args: argparse.Namespace) -> int:
    try:
        r_total, budget = _parse_resources(args.resources)
    except ValueError as exc:
        print(f"spectool simulate: bad --resources: {exc}", file=sys.stderr)
        return EXIT_USAGE
    modes = [BASELINE, SPECULATIVE] if args.mode == "both" else \
        [BASELINE if args.mode == "baseline" else SPECULATIVE]
    needs_spec = SPECULATIVE in modes
    if needs_spec and (not args.pool or not args.policy):
        print("spectool simulate: --pool and --policy are required for "
              "speculative runs", file=sys.stderr)
        return EXIT_USAGE

    config = ExperimentConfig(
        workload_path=args.workload, arrivals_path=args.arrivals,
        pool_path=args.pool, policy_path=args.policy, out_dir=args.out_dir,
        mode=args.mode, seed=args.seed, r_total=r_total, spec_budget=budget,
        epoch_ms=args.epoch_ms, window=args.window,
        max_candidates=args.max_candidates)
    try:
        config.validate()
        workload = load_workload(config.workload_path)
        arrivals = load_arrivals(config.arrivals_path)
        pool = load_pool(config.pool_path) if needs_spec else None
        policy = None
        if needs_spec:
            with open(config.policy_path, "r", encoding="utf-8") as fh:
                parsed = parse_policy(fh.read())
            for warning in parsed.warnings:
                print(f"spectool simulate: policy warning: {warning}", file=sys.stderr)
            policy = parsed.policy
    except (OSError, FileNotFoundError, PoolFormatError, PolicyParseError,
            ValueError) as exc:
        print(f"spectool simulate: {exc}", file=sys.stderr)
        return EXIT_USAGE

    log_level = _log_level()
    reports = {}
    violations: list[str] = []
    try:
        for mode in modes:
            engine = build_engine(
                workload, arrivals, mode=mode, seed=config.seed,
                pool=pool if mode == SPECULATIVE else None,
                policy=policy if mode == SPECULATIVE else None,
                r_total=config.r_total, spec_budget=config.spec_budget,
                epoch_ms=config.epoch_ms, window_capacity=config.window,
                max_candidates=config.max_candidates)
            report = engine.run()
            reports[mode] = report
            violations.extend(report.invariant_violations)
            base = os.path.join(config.out_dir, f"report_{mode}")
            with open(base + ".json", "w", encoding="utf-8") as fh:
                report.dump(fh)
            with open(base + "_latency_cdf.csv", "w", encoding="utf-8", newline="") as fh:
                write_latency_cdf(report, fh)
            with open(base + "_breakdown.csv", "w", encoding="utf-8", newline="") as fh:
                write_breakdown(report, fh)
            if log_level >= 1:
                log_path = os.path.join(config.out_dir, f"event_log_{mode}.jsonl")
                with open(log_path, "w", encoding="utf-8") as fh:
                    for record in engine.scheduler.log:
                        fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
            if log_level >= 2:
                print(f"spectool simulate: {mode}: {len(engine.scheduler.log)} "
                      f"scheduler transitions", file=sys.stderr)
    except SimulationError as exc:
        print(f"spectool simulate: {exc}", file=sys.stderr)
        return EXIT_INVARIANT

    if len(modes) == 2:
        delta = compare_runs(reports[BASELINE], reports[SPECULATIVE])
        with open(os.path.join(config.out_dir, "delta.json"), "w", encoding="utf-8") as fh:
            json.dump(delta.to_json(), fh, sort_keys=True, indent=2)
            fh.write("\n")
        with open(os.path.join(config.out_dir, "speedup_cdf.csv"), "w",
                  encoding="utf-8", newline="") as fh:
            write_speedup_cdf(delta, fh)

    summary = {mode: report.aggregates for mode, report in reports.items()}
    summary["invariant_violations"] = violations
    _print_json(summary)
    if violations:
        print("spectool simulate: invariant violations detected", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def _cmd_check_policy(args: argparse.Namespace) -> int:
    import yaml

    try:
        with open(args.policy, "r", encoding="utf-8") as fh:
            parsed = parse_policy(fh.read())
    except OSError as exc:
        print(f"spectool check-policy: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PolicyParseError as exc:
        print(f"spectool check-policy: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for warning in parsed.warnings:
        print(f"spectool check-policy: warning: {warning}", file=sys.stderr)
    print(yaml.safe_dump(policy_to_dict(parsed.policy), sort_keys=True,
                         default_flow_style=False), end="")
    return EXIT_OK


def _log_level() -> int:
    raw = os.environ.get(LOG_ENV_VAR, "0")
    try:
        return max(int(raw), 0)
    except ValueError:
        return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "mine": _cmd_mine,
        "score": _cmd_score,
        "simulate": _cmd_simulate,
        "check-policy": _cmd_check_policy,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
