"""Run reports, baseline/speculative comparison, and plot-ready CSV output."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import IO, Any, Sequence


def percentile(values: Sequence[float], q: float) -> float:
    """Linear-interpolation percentile over the sorted sample, q in [0, 100]."""
    if not values:
        return 0.0
    ordered = sorted(values)
    if len(ordered) == 1:
        return ordered[0]
    pos = (q / 100.0) * (len(ordered) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(ordered) - 1)
    frac = pos - lo
    return ordered[lo] * (1 - frac) + ordered[hi] * frac


@dataclass(frozen=True)
class RequestMetrics:
    request_id: str
    script_id: str
    session_id: str
    arrival_ms: float
    finish_ms: float
    e2e_ms: float
    think_ms: float
    tool_exec_ms: float
    tool_stall_ms: float
    overlap_ms: float
    spec_overhead_ms: float
    n_calls: int


@dataclass
class RunReport:
    workload_id: str
    mode: str
    seed: int
    resources: dict[str, Any]
    match_relation: str | None
    requests: list[RequestMetrics]
    prediction: dict[str, float]
    audit: dict[str, Any]
    invariant_violations: list[str] = field(default_factory=list)

    @property
    def aggregates(self) -> dict[str, float]:
        e2e = [r.e2e_ms for r in self.requests]
        stall = [r.tool_stall_ms for r in self.requests]
        span_start = min((r.arrival_ms for r in self.requests), default=0.0)
        span_end = max((r.finish_ms for r in self.requests), default=0.0)
        span = span_end - span_start
        return {
            "n_requests": float(len(self.requests)),
            "e2e_mean_ms": sum(e2e) / len(e2e) if e2e else 0.0,
            "e2e_p95_ms": percentile(e2e, 95),
            "e2e_p99_ms": percentile(e2e, 99),
            "stall_mean_ms": sum(stall) / len(stall) if stall else 0.0,
            "stall_total_ms": sum(stall),
            "overlap_total_ms": sum(r.overlap_ms for r in self.requests),
            "spec_overhead_total_ms": sum(r.spec_overhead_ms for r in self.requests),
            "throughput_rps": (len(self.requests) / span * 1000.0) if span > 0 else 0.0,
        }

    def to_json(self) -> dict[str, Any]:
        return {
            "workload_id": self.workload_id,
            "mode": self.mode,
            "seed": self.seed,
            "resources": self.resources,
            "match_relation": self.match_relation,
            "requests": [asdict(r) for r in self.requests],
            "aggregates": self.aggregates,
            "prediction": self.prediction,
            "audit": self.audit,
            "invariant_violations": list(self.invariant_violations),
        }

    def dump(self, sink: IO[str]) -> None:
        json.dump(self.to_json(), sink, sort_keys=True, indent=2)
        sink.write("\n")

    @staticmethod
    def from_json(obj: dict[str, Any]) -> "RunReport":
        return RunReport(
            workload_id=obj["workload_id"],
            mode=obj["mode"],
            seed=obj["seed"],
            resources=obj["resources"],
            match_relation=obj.get("match_relation"),
            requests=[RequestMetrics(**r) for r in obj["requests"]],
            prediction=obj.get("prediction", {}),
            audit=obj.get("audit", {}),
            invariant_violations=list(obj.get("invariant_violations", [])),
        )


@dataclass(frozen=True)
class SpeedupRow:
    request_id: str
    baseline_e2e_ms: float
    speculative_e2e_ms: float
    speedup: float
    baseline_stall_ms: float
    speculative_stall_ms: float


@dataclass
class DeltaReport:
    workload_id: str
    seed: int
    rows: list[SpeedupRow]

    @property
    def mean_speedup(self) -> float:
        if not self.rows:
            return 1.0
        return sum(r.speedup for r in self.rows) / len(self.rows)

    @property
    def stall_reduction(self) -> float:
        base = sum(r.baseline_stall_ms for r in self.rows)
        spec = sum(r.speculative_stall_ms for r in self.rows)
        return (base - spec) / base if base > 0 else 0.0

    @property
    def e2e_reduction(self) -> float:
        base = sum(r.baseline_e2e_ms for r in self.rows)
        spec = sum(r.speculative_e2e_ms for r in self.rows)
        return (base - spec) / base if base > 0 else 0.0

    def fraction_at_least(self, threshold: float) -> float:
        if not self.rows:
            return 0.0
        return sum(1 for r in self.rows if r.speedup >= threshold) / len(self.rows)

    def to_json(self) -> dict[str, Any]:
        return {
            "workload_id": self.workload_id,
            "seed": self.seed,
            "mean_speedup": self.mean_speedup,
            "stall_reduction": self.stall_reduction,
            "e2e_reduction": self.e2e_reduction,
            "fraction_speedup_ge_1": self.fraction_at_least(1.0),
            "rows": [asdict(r) for r in self.rows],
        }


def compare_runs(baseline: RunReport, speculative: RunReport) -> DeltaReport:
    """Per-request deltas between two runs of the same seeded workload."""
    if baseline.workload_id != speculative.workload_id:
        raise ValueError("reports compare different workloads: "
                         f"{baseline.workload_id!r} vs {speculative.workload_id!r}")
    if baseline.seed != speculative.seed:
        raise ValueError(f"reports compare different seeds: "
                         f"{baseline.seed} vs {speculative.seed}")
    by_id = {r.request_id: r for r in speculative.requests}
    if set(by_id) != {r.request_id for r in baseline.requests}:
        raise ValueError("reports cover different request sets")
    rows = []
    for base in baseline.requests:
        spec = by_id[base.request_id]
        speedup = base.e2e_ms / spec.e2e_ms if spec.e2e_ms > 0 else 1.0
        rows.append(SpeedupRow(
            request_id=base.request_id,
            baseline_e2e_ms=base.e2e_ms,
            speculative_e2e_ms=spec.e2e_ms,
            speedup=speedup,
            baseline_stall_ms=base.tool_stall_ms,
            speculative_stall_ms=spec.tool_stall_ms,
        ))
    return DeltaReport(workload_id=baseline.workload_id, seed=baseline.seed, rows=rows)


# ---------------------------------------------------------------------------
# Plot-ready CSV output
# ---------------------------------------------------------------------------


def write_latency_cdf(report: RunReport, sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["mode", "e2e_ms", "cdf"])
    ordered = sorted(r.e2e_ms for r in report.requests)
    n = len(ordered)
    for i, value in enumerate(ordered, start=1):
        writer.writerow([report.mode, f"{value:.3f}", f"{i / n:.6f}"])


def write_breakdown(report: RunReport, sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["request_id", "e2e_ms", "think_ms", "tool_exec_ms",
                     "tool_stall_ms", "overlap_ms", "spec_overhead_ms"])
    for r in report.requests:
        writer.writerow([r.request_id, f"{r.e2e_ms:.3f}", f"{r.think_ms:.3f}",
                         f"{r.tool_exec_ms:.3f}", f"{r.tool_stall_ms:.3f}",
                         f"{r.overlap_ms:.3f}", f"{r.spec_overhead_ms:.3f}"])


def write_speedup_cdf(delta: DeltaReport, sink: IO[str]) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["request_id", "baseline_e2e_ms", "speculative_e2e_ms",
                     "speedup", "cdf"])
    ordered = sorted(delta.rows, key=lambda r: r.speedup)
    n = len(ordered)
    for i, row in enumerate(ordered, start=1):
        writer.writerow([row.request_id, f"{row.baseline_e2e_ms:.3f}",
                         f"{row.speculative_e2e_ms:.3f}", f"{row.speedup:.6f}",
                         f"{i / n:.6f}"])
