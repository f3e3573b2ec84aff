"""Workload construction: motif scripts, corpus synthesis, and file formats.

The motif generators encode the recurring agent flows this system exploits
(edit-then-verify, locate-then-examine, search-then-visit, batch fetch),
with configurable transition rates and planted argument dependencies. The
same script machinery drives both offline corpus generation (for mining) and
the live simulator, so mined patterns transfer between the two.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from typing import IO, Any, Callable, Mapping, Sequence

from .events import Event, EventKind, Session, Status, stable_seed
from .simulation import (
    AgentScript,
    Arrival,
    ArrivalTrace,
    CallRecord,
    LatencySpec,
    ScriptStep,
    SimulationEngine,
    ToolModel,
    sample_exec_ms,
    tool_result,
)

MOTIF_KINDS = ("search_visit", "edit_verify", "locate_examine", "batch_fetch", "plain")


@dataclass(frozen=True)
class ScriptSpec:
    """Declarative script description, materialized per run with a seed."""

    script_id: str
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    steps: tuple[Mapping[str, Any], ...] = ()
    final_think_ms: float = 0.0


@dataclass
class Workload:
    workload_id: str
    tools: dict[str, ToolModel]
    scripts: dict[str, ScriptSpec]
    motif_mix: dict[str, float] = field(default_factory=dict)

    def script_factories(self) -> dict[str, Callable[[int], AgentScript]]:
        return {sid: (lambda seed, s=spec: materialize_script(s, seed))
                for sid, spec in self.scripts.items()}


# ---------------------------------------------------------------------------
# History helpers shared by the motif args functions
# ---------------------------------------------------------------------------


def _last_success_result(history: Sequence[CallRecord], tool: str) -> Any:
    for t, _args, ok, result in reversed(history):
        if t == tool and ok:
            return result
    return None


def _url_at(result: Any, index: int) -> str | None:
    if not isinstance(result, dict):
        return None
    entries = result.get("list") or []
    if index >= len(entries):
        return None
    return entries[index].get("url")


# ---------------------------------------------------------------------------
# Motif constructors
# ---------------------------------------------------------------------------

Transition = tuple[str, str]


@dataclass
class MotifTruth:
    """Generator-side transition counts, the oracle for mined confidences."""

    offered: int = 0
    fired: int = 0

    @property
    def rate(self) -> float:
        return self.fired / self.offered if self.offered else 0.0


def _token(rng: random.Random) -> str:
    return f"{rng.getrandbits(40):010x}"


def _make_search_visit(script_id: str, seed: int,
                       params: Mapping[str, Any]) -> tuple[AgentScript, dict[Transition, MotifTruth]]:
    rng = random.Random(seed)
    rounds = int(params.get("rounds", 3))
    visit_rate = float(params.get("visit_rate", 0.51))
    think_ms = float(params.get("think_ms", 2000.0))
    retry_think_ms = float(params.get("retry_think_ms", 500.0))
    truth = MotifTruth()
    steps: list[ScriptStep] = []
    for _ in range(rounds):
        query = {"query": f"q-{_token(rng)}"}
        steps.append(ScriptStep(think_ms, "search", lambda h, q=query: q))
        truth.offered += 1
        if rng.random() < visit_rate:
            truth.fired += 1

            def visit_args(history: Sequence[CallRecord]) -> Any:
                result = _last_success_result(history, "search")
                url = _url_at(result, 0)
                return {"url": url} if url else None

            def retry_args(history: Sequence[CallRecord]) -> Any:
                if not history:
                    return None
                tool, _a, ok, _r = history[-1]
                if tool != "web_fetch" or ok:
                    return None
                url = _url_at(_last_success_result(history, "search"), 1)
                return {"url": url} if url else None

            steps.append(ScriptStep(think_ms, "web_fetch", visit_args))
            steps.append(ScriptStep(retry_think_ms, "web_fetch", retry_args))
    script = AgentScript(script_id=script_id, steps=tuple(steps),
                         final_think_ms=float(params.get("final_think_ms", 500.0)))
    return script, {("search", "web_fetch"): truth}


def _make_edit_verify(script_id: str, seed: int,
                      params: Mapping[str, Any]) -> tuple[AgentScript, dict[Transition, MotifTruth]]:
    rng = random.Random(seed)
    rounds = int(params.get("rounds", 4))
    verify_rate = float(params.get("verify_rate", 0.55))
    think_ms = float(params.get("think_ms", 2000.0))
    truth = MotifTruth()
    steps: list[ScriptStep] = []
    for _ in range(rounds):
        edit = {"path": f"src/fix_{_token(rng)}.py", "change": _token(rng)}
        steps.append(ScriptStep(think_ms, "file_editor", lambda h, e=edit: e))
        truth.offered += 1
        if rng.random() < verify_rate:
            truth.fired += 1

            def verify_args(history: Sequence[CallRecord]) -> Any:
                result = _last_success_result(history, "file_editor")
                if not isinstance(result, dict) or not result.get("path"):
                    return None
                return {"cmd": f"pytest {result['path']}"}

            steps.append(ScriptStep(think_ms, "terminal", verify_args))
    script = AgentScript(script_id=script_id, steps=tuple(steps),
                         final_think_ms=float(params.get("final_think_ms", 500.0)))
    return script, {("file_editor", "terminal"): truth}


def _make_locate_examine(script_id: str, seed: int,
                         params: Mapping[str, Any]) -> tuple[AgentScript, dict[Transition, MotifTruth]]:
    rng = random.Random(seed)
    rounds = int(params.get("rounds", 4))
    open_rate = float(params.get("open_rate", 0.38))
    think_ms = float(params.get("think_ms", 1500.0))
    truth = MotifTruth()
    steps: list[ScriptStep] = []
    for _ in range(rounds):
        pattern = {"pattern": f"sym_{_token(rng)}"}
        steps.append(ScriptStep(think_ms, "grep", lambda h, p=pattern: p))
        truth.offered += 1
        if rng.random() < open_rate:
            truth.fired += 1

            def open_args(history: Sequence[CallRecord]) -> Any:
                result = _last_success_result(history, "grep")
                if not isinstance(result, dict):
                    return None
                hits = result.get("hits") or []
                if not hits:
                    return None
                return {"path": hits[0]["path"]}

            steps.append(ScriptStep(think_ms, "file_editor", open_args))
    script = AgentScript(script_id=script_id, steps=tuple(steps),
                         final_think_ms=float(params.get("final_think_ms", 500.0)))
    return script, {("grep", "file_editor"): truth}


def _make_batch_fetch(script_id: str, seed: int,
                      params: Mapping[str, Any]) -> tuple[AgentScript, dict[Transition, MotifTruth]]:
    rng = random.Random(seed)
    fetch_count = int(params.get("fetch_count", 3))
    think_ms = float(params.get("think_ms", 1500.0))
    follow_think_ms = float(params.get("follow_think_ms", 400.0))
    query = {"query": f"q-{_token(rng)}"}
    steps: list[ScriptStep] = [ScriptStep(think_ms, "search", lambda h, q=query: q)]
    truth = MotifTruth(offered=1, fired=1 if fetch_count > 0 else 0)
    for i in range(fetch_count):
        def fetch_args(history: Sequence[CallRecord], idx: int = i) -> Any:
            url = _url_at(_last_success_result(history, "search"), idx)
            return {"url": url} if url else None

        steps.append(ScriptStep(think_ms if i == 0 else follow_think_ms,
                                "web_fetch", fetch_args))
    script = AgentScript(script_id=script_id, steps=tuple(steps),
                         final_think_ms=float(params.get("final_think_ms", 500.0)))
    return script, {("search", "web_fetch"): truth}


def _make_plain(script_id: str, seed: int,
                params: Mapping[str, Any]) -> tuple[AgentScript, dict[Transition, MotifTruth]]:
    rng = random.Random(seed)
    calls = int(params.get("calls", 4))
    tool = str(params.get("tool", "work"))
    think_ms = float(params.get("think_ms", 100.0))
    steps = []
    for _ in range(calls):
        args = {"token": _token(rng)}
        steps.append(ScriptStep(think_ms, tool, lambda h, a=args: a))
    script = AgentScript(script_id=script_id, steps=tuple(steps),
                         final_think_ms=float(params.get("final_think_ms", 0.0)))
    return script, {}


_MOTIF_BUILDERS = {
    "search_visit": _make_search_visit,
    "edit_verify": _make_edit_verify,
    "locate_examine": _make_locate_examine,
    "batch_fetch": _make_batch_fetch,
    "plain": _make_plain,
}


def _make_literal(spec: ScriptSpec) -> AgentScript:
    steps = []
    for raw in spec.steps:
        args = raw.get("args", {})
        steps.append(ScriptStep(float(raw.get("think_ms", 0.0)), str(raw["tool"]),
                                lambda h, a=args: a))
    return AgentScript(script_id=spec.script_id, steps=tuple(steps),
                       final_think_ms=spec.final_think_ms)


def materialize_script(spec: ScriptSpec, seed: int) -> AgentScript:
    if spec.kind == "literal":
        return _make_literal(spec)
    builder = _MOTIF_BUILDERS.get(spec.kind)
    if builder is None:
        raise ValueError(f"unknown script kind {spec.kind!r}")
    script, _truth = builder(spec.script_id, seed, spec.params)
    return script


# ---------------------------------------------------------------------------
# Default tool models for the motif universe
# ---------------------------------------------------------------------------


def default_motif_tools(poison_first_rate: float = 0.0) -> dict[str, ToolModel]:
    return {
        "search": ToolModel("search", LatencySpec(kind="fixed", ms=700.0),
                            result_kind="url_list", result_size=5,
                            poison_first_rate=poison_first_rate),
        "web_fetch": ToolModel("web_fetch",
                               LatencySpec(kind="lognormal", median_ms=900.0, sigma=0.25),
                               init_overhead_ms=150.0),
        "file_editor": ToolModel("file_editor", LatencySpec(kind="fixed", ms=300.0),
                                 result_kind="edit"),
        "terminal": ToolModel("terminal",
                              LatencySpec(kind="lognormal", median_ms=1200.0, sigma=0.2),
                              init_overhead_ms=200.0),
        "grep": ToolModel("grep", LatencySpec(kind="fixed", ms=400.0),
                          result_kind="file_hits", result_size=4),
        "work": ToolModel("work", LatencySpec(kind="fixed", ms=900.0)),
        "noop": ToolModel("noop", LatencySpec(kind="fixed", ms=100.0)),
    }


# ---------------------------------------------------------------------------
# Corpus generation
# ---------------------------------------------------------------------------


@dataclass
class CorpusBundle:
    sessions: list[Session]
    truth: dict[str, MotifTruth]


def generate_corpus(motif_mix: Mapping[str, float], n_sessions: int, seed: int,
                    params: Mapping[str, Mapping[str, Any]] | None = None,
                    tools: Mapping[str, ToolModel] | None = None) -> CorpusBundle:
    """Synthesize sessions with planted transition rates and dependencies.

    Returns generator-side truth counts per transition so tests can compare
    mined confidences against the exact planted empirical rates.
    """
    if not motif_mix:
        raise ValueError("motif_mix must name at least one motif")
    for name, weight in motif_mix.items():
        if name not in _MOTIF_BUILDERS:
            raise ValueError(f"unknown motif {name!r}")
        if weight < 0:
            raise ValueError("motif weights must be non-negative")
    tools = dict(tools or default_motif_tools())
    params = params or {}
    picker = random.Random(stable_seed(seed, "motif_mix"))
    names = sorted(motif_mix)
    weights = [motif_mix[n] for n in names]

    sessions: list[Session] = []
    truth: dict[str, MotifTruth] = {}
    for i in range(n_sessions):
        motif = picker.choices(names, weights=weights, k=1)[0]
        script, script_truth = _MOTIF_BUILDERS[motif](
            f"{motif}-{i}", stable_seed(seed, "session", i, motif),
            params.get(motif, {}))
        for (src, dst), counts in script_truth.items():
            agg = truth.setdefault(f"{src}->{dst}", MotifTruth())
            agg.offered += counts.offered
            agg.fired += counts.fired
        session_id = f"g{seed & 0xffff:04x}-{i:05d}"
        sessions.append(_replay_serial(session_id, script, tools, seed))
    return CorpusBundle(sessions=sessions, truth=truth)


def _replay_serial(session_id: str, script: AgentScript,
                   tools: Mapping[str, ToolModel], run_seed: int) -> Session:
    """Walk a script with no contention: think, call, repeat."""
    t = 0.0
    seq = 0
    history: list[CallRecord] = []
    events: list[Event] = []
    for step in script.steps:
        args = step.args_fn(history)
        if args is None:
            continue
        if step.think_ms > 0:
            events.append(Event(session_id, seq, EventKind.LLM_STEP, "", Status.SUCCESS,
                                None, None, t, t + step.think_ms))
            seq += 1
            t += step.think_ms
        model = tools.get(step.tool_type)
        if model is None:
            raise ValueError(f"no tool model for {step.tool_type!r}")
        ok, result = tool_result(model, args, run_seed)
        duration = model.init_overhead_ms + sample_exec_ms(model, args, run_seed)
        events.append(Event(session_id, seq, EventKind.TOOL_CALL, step.tool_type,
                            Status.SUCCESS if ok else Status.FAIL, args, result,
                            t, t + duration))
        seq += 1
        t += duration
        history.append((step.tool_type, args, ok, result))
    return Session(session_id, tuple(events))


# ---------------------------------------------------------------------------
# Workload and arrivals files
# ---------------------------------------------------------------------------


def tool_to_json(model: ToolModel) -> dict[str, Any]:
    return {
        "tool": model.tool_type,
        "latency": model.latency.to_json(),
        "init_overhead_ms": model.init_overhead_ms,
        "side_effecting": model.side_effecting,
        "dry_run_supported": model.dry_run_supported,
        "cost": model.cost,
        "result_kind": model.result_kind,
        "result_size": model.result_size,
        "poison_first_rate": model.poison_first_rate,
    }


def tool_from_json(obj: Mapping[str, Any]) -> ToolModel:
    return ToolModel(
        tool_type=str(obj["tool"]),
        latency=LatencySpec.from_json(obj["latency"]),
        init_overhead_ms=float(obj.get("init_overhead_ms", 0.0)),
        side_effecting=bool(obj.get("side_effecting", False)),
        dry_run_supported=bool(obj.get("dry_run_supported", True)),
        cost=int(obj.get("cost", 1)),
        result_kind=str(obj.get("result_kind", "echo")),
        result_size=int(obj.get("result_size", 5)),
        poison_first_rate=float(obj.get("poison_first_rate", 0.0)),
    )


def workload_to_json(workload: Workload) -> dict[str, Any]:
    scripts = []
    for spec in workload.scripts.values():
        entry: dict[str, Any] = {"id": spec.script_id, "kind": spec.kind}
        if spec.params:
            entry["params"] = dict(spec.params)
        if spec.kind == "literal":
            entry["steps"] = [dict(s) for s in spec.steps]
            entry["final_think_ms"] = spec.final_think_ms
        scripts.append(entry)
    return {
        "workload_id": workload.workload_id,
        "tools": [tool_to_json(m) for _, m in sorted(workload.tools.items())],
        "scripts": scripts,
        "motif_mix": dict(workload.motif_mix),
    }


def workload_from_json(obj: Mapping[str, Any]) -> Workload:
    tools = {}
    for raw in obj.get("tools", []):
        model = tool_from_json(raw)
        tools[model.tool_type] = model
    scripts = {}
    for raw in obj.get("scripts", []):
        spec = ScriptSpec(
            script_id=str(raw["id"]),
            kind=str(raw["kind"]),
            params=dict(raw.get("params", {})),
            steps=tuple(raw.get("steps", [])),
            final_think_ms=float(raw.get("final_think_ms", 0.0)),
        )
        scripts[spec.script_id] = spec
    return Workload(
        workload_id=str(obj.get("workload_id", "workload")),
        tools=tools,
        scripts=scripts,
        motif_mix=dict(obj.get("motif_mix", {})),
    )


def load_workload(path: str) -> Workload:
    with open(path, "r", encoding="utf-8") as fh:
        return workload_from_json(json.load(fh))


def save_workload(workload: Workload, sink: IO[str] | str) -> None:
    text = json.dumps(workload_to_json(workload), sort_keys=True, indent=2) + "\n"
    if isinstance(sink, str):
        with open(sink, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sink.write(text)


def load_arrivals(path: str) -> ArrivalTrace:
    arrivals: list[Arrival] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for row in reader:
            if not row or row[0].strip() == "arrival_ms":
                continue
            arrivals.append(Arrival(arrival_ms=float(row[0]), script_id=row[1].strip()))
    return ArrivalTrace(tuple(arrivals))


def save_arrivals(trace: ArrivalTrace, sink: IO[str] | str) -> None:
    def _write(fh: IO[str]) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["arrival_ms", "script_id"])
        for a in trace.arrivals:
            writer.writerow([f"{a.arrival_ms:g}", a.script_id])

    if isinstance(sink, str):
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            _write(fh)
    else:
        _write(sink)


def build_engine(workload: Workload, arrivals: ArrivalTrace, *, mode: str, seed: int,
                 pool=None, policy=None, **engine_kwargs) -> SimulationEngine:
    return SimulationEngine(
        workload_id=workload.workload_id,
        tools=workload.tools,
        scripts=workload.script_factories(),
        arrivals=arrivals,
        mode=mode,
        seed=seed,
        pool=pool,
        policy=policy,
        **engine_kwargs,
    )
