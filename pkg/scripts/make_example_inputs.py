#!/usr/bin/env python3
"""Emit a ready-to-use input set for the spectool CLI.

Writes trace.jsonl (synthetic mining corpus), workload.json, arrivals.csv,
and policy.yaml into the target directory, then prints the matching command
lines.

Usage:
    python3 scripts/make_example_inputs.py --out-dir examples_io
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from spectool.events import write_trace
from spectool.simulation import Arrival, ArrivalTrace
from spectool.workloads import (
    ScriptSpec,
    Workload,
    default_motif_tools,
    generate_corpus,
    save_arrivals,
    save_workload,
)

POLICY = """\
speculation_policy:
  default:
    allow: false

  tools:
    web_fetch:
      allow: true
      max_speculation: full
    terminal:
      allow: true
      max_speculation: dry_run
    search:
      allow: true
      max_speculation: full
    file_editor:
      allow: true
      max_speculation: dry_run

  deduplication:
    strategy: max_expected_speculative_utility
"""

PARAMS = {
    "search_visit": {"visit_rate": 0.51, "rounds": 3, "think_ms": 2000.0},
    "edit_verify": {"verify_rate": 0.55, "rounds": 3, "think_ms": 2000.0},
}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="examples_io")
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--sessions", type=int, default=300)
    args = parser.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)

    corpus = generate_corpus({"search_visit": 0.5, "edit_verify": 0.5},
                             args.sessions, seed=args.seed, params=PARAMS)
    trace_path = os.path.join(args.out_dir, "trace.jsonl")
    with open(trace_path, "w", encoding="utf-8") as fh:
        lines = write_trace(corpus.sessions, fh)

    workload = Workload(
        workload_id="motif-mix",
        tools=default_motif_tools(),
        scripts={
            "sv": ScriptSpec("sv", "search_visit", PARAMS["search_visit"]),
            "ev": ScriptSpec("ev", "edit_verify", PARAMS["edit_verify"]),
        },
        motif_mix={"search_visit": 0.5, "edit_verify": 0.5})
    save_workload(workload, os.path.join(args.out_dir, "workload.json"))
    save_arrivals(ArrivalTrace(tuple(
        Arrival(i * 1000.0, "sv" if i % 2 == 0 else "ev") for i in range(20))),
        os.path.join(args.out_dir, "arrivals.csv"))
    with open(os.path.join(args.out_dir, "policy.yaml"), "w", encoding="utf-8") as fh:
        fh.write(POLICY)

    d = args.out_dir
    print(f"wrote {lines} trace lines and CLI inputs under {d}/")
    print("try:")
    print(f"  spectool mine --trace {d}/trace.jsonl --out {d}/pool.json --tau 0.4")
    print(f"  spectool score --pool {d}/pool.json --trace {d}/trace.jsonl")
    print(f"  spectool check-policy --policy {d}/policy.yaml")
    print(f"  spectool simulate --workload {d}/workload.json "
          f"--arrivals {d}/arrivals.csv --pool {d}/pool.json "
          f"--policy {d}/policy.yaml --resources 24,8 --seed 1 --mode both "
          f"--out-dir {d}/out")
    return 0


if __name__ == "__main__":
    sys.exit(main())
