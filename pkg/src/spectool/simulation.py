"""Virtual-clock simulation of the agent think/tool loop.

Agents follow scripted think-then-call sequences; tool latencies, results,
and failures are pure functions of (run seed, tool, arguments), so the
authoritative workload an agent generates is identical whether or not
speculation is enabled. That property is what makes the non-interference and
safety checks exact rather than statistical.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from .events import Event, EventKind, Status, canonical_arg_hash, stable_seed
from .mining import PatternPool
from .policy import (
    SpecLevel,
    SpeculationPolicy,
    SpeculativeAction,
    admit,
    transform_side_effecting,
)
from .prediction import PredictedInvocation, PredictionWindow, Predictor
from .reporting import RequestMetrics, RunReport
from .scheduling import (
    EstimateBook,
    Job,
    JobKind,
    JobState,
    ResourceState,
    Scheduler,
    Ticket,
)

BASELINE = "baseline"
SPECULATIVE = "spec"


class SimulationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Tool models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatencySpec:
    """Sampled execution latency: fixed, uniform, or lognormal (median/sigma)."""

    kind: str
    ms: float = 0.0
    low_ms: float = 0.0
    high_ms: float = 0.0
    median_ms: float = 0.0
    sigma: float = 0.0

    def sample(self, rng: random.Random) -> float:
        if self.kind == "fixed":
            return self.ms
        if self.kind == "uniform":
            return rng.uniform(self.low_ms, self.high_ms)
        if self.kind == "lognormal":
            return self.median_ms * math.exp(self.sigma * rng.gauss(0.0, 1.0))
        raise ValueError(f"unknown latency kind {self.kind!r}")

    def mean(self) -> float:
        if self.kind == "fixed":
            return self.ms
        if self.kind == "uniform":
            return (self.low_ms + self.high_ms) / 2.0
        if self.kind == "lognormal":
            return self.median_ms * math.exp(self.sigma ** 2 / 2.0)
        raise ValueError(f"unknown latency kind {self.kind!r}")

    def to_json(self) -> dict[str, Any]:
        if self.kind == "fixed":
            return {"kind": "fixed", "ms": self.ms}
        if self.kind == "uniform":
            return {"kind": "uniform", "low_ms": self.low_ms, "high_ms": self.high_ms}
        return {"kind": "lognormal", "median_ms": self.median_ms, "sigma": self.sigma}

    @staticmethod
    def from_json(obj: Mapping[str, Any]) -> "LatencySpec":
        kind = obj["kind"]
        if kind == "fixed":
            return LatencySpec(kind="fixed", ms=float(obj["ms"]))
        if kind == "uniform":
            return LatencySpec(kind="uniform", low_ms=float(obj["low_ms"]),
                               high_ms=float(obj["high_ms"]))
        if kind == "lognormal":
            return LatencySpec(kind="lognormal", median_ms=float(obj["median_ms"]),
                               sigma=float(obj["sigma"]))
        raise ValueError(f"unknown latency kind {kind!r}")


FAIL_MARKER = "#bad"

RESULT_KINDS = ("echo", "url_list", "file_hits", "edit")


@dataclass(frozen=True)
class ToolModel:
    tool_type: str
    latency: LatencySpec
    init_overhead_ms: float = 0.0
    side_effecting: bool = False
    dry_run_supported: bool = True
    cost: int = 1
    result_kind: str = "echo"
    result_size: int = 5
    poison_first_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.result_kind not in RESULT_KINDS:
            raise ValueError(f"unknown result kind {self.result_kind!r}")
        if self.cost < 1:
            raise ValueError("tool cost must be >= 1")

    def mean_total_ms(self) -> float:
        return self.latency.mean() + self.init_overhead_ms


def _string_leaves(payload: Any):
    if isinstance(payload, dict):
        for v in payload.values():
            yield from _string_leaves(v)
    elif isinstance(payload, list):
        for v in payload:
            yield from _string_leaves(v)
    elif isinstance(payload, str):
        yield payload


def _has_marker(args: Any) -> bool:
    return any(FAIL_MARKER in s for s in _string_leaves(args))


def sample_exec_ms(model: ToolModel, args: Any, run_seed: int) -> float:
    rng = random.Random(stable_seed(run_seed, "latency", model.tool_type,
                                    canonical_arg_hash(args)))
    return max(model.latency.sample(rng), 0.0)


def tool_result(model: ToolModel, args: Any, run_seed: int) -> tuple[bool, Any]:
    """Deterministic tool outcome: same (seed, tool, args) always agree.

    Failure is marker-driven (an argument containing the fail marker fails),
    which lets workload generators plant retry flows reproducibly.
    """
    arg_hash = canonical_arg_hash(args)
    ok = not _has_marker(args)
    token = arg_hash[:16]
    if model.result_kind == "url_list":
        urls = [f"https://{arg_hash[:8]}-{i}.example/doc" for i in range(model.result_size)]
        if model.poison_first_rate > 0:
            draw = stable_seed(run_seed, "poison", model.tool_type, arg_hash) % 1_000_000
            if draw / 1_000_000 < model.poison_first_rate:
                urls[0] += FAIL_MARKER
        result: Any = {"list": [{"url": u, "rank": i} for i, u in enumerate(urls)],
                       "total": model.result_size}
    elif model.result_kind == "file_hits":
        result = {"hits": [{"path": f"src/m{arg_hash[:8]}_{i}.py", "line": 10 * (i + 1)}
                           for i in range(model.result_size)],
                  "count": model.result_size}
    elif model.result_kind == "edit":
        path = args.get("path") if isinstance(args, dict) else None
        result = {"path": path, "applied": ok}
    else:
        result = {"ok": ok, "token": token}
    if not ok:
        result = {"ok": False, "error": "execution_failed", "token": token}
    return ok, result


# ---------------------------------------------------------------------------
# Agent scripts
# ---------------------------------------------------------------------------

CallRecord = tuple[str, Any, bool, Any]  # (tool, args, ok, result)
ArgsFn = Callable[[Sequence[CallRecord]], Any]


@dataclass(frozen=True)
class ScriptStep:
    """One think-then-call step; args_fn returning None skips the step."""

    think_ms: float
    tool_type: str
    args_fn: ArgsFn


@dataclass(frozen=True)
class AgentScript:
    script_id: str
    steps: tuple[ScriptStep, ...]
    final_think_ms: float = 0.0


@dataclass(frozen=True)
class Arrival:
    arrival_ms: float
    script_id: str


@dataclass(frozen=True)
class ArrivalTrace:
    arrivals: tuple[Arrival, ...]

    def __post_init__(self) -> None:
        times = [a.arrival_ms for a in self.arrivals]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("arrival times must be non-decreasing")

    def __len__(self) -> int:
        return len(self.arrivals)


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


@dataclass
class _CallMetrics:
    tool_type: str
    submitted_at: float
    resolved_at: float
    how: str
    serving_job_id: int | None


@dataclass
class _RequestState:
    index: int
    request_id: str
    script: AgentScript
    session_id: str
    arrival_ms: float
    step: int = 0
    seq: int = 0
    history: list[CallRecord] = field(default_factory=list)
    thinks: list[tuple[float, float]] = field(default_factory=list)
    calls: list[_CallMetrics] = field(default_factory=list)
    window: PredictionWindow | None = None
    seen_tool_event: bool = False
    last_predictions: list[PredictedInvocation] = field(default_factory=list)
    results: list[Any] = field(default_factory=list)
    finished_at: float | None = None
    top1: int = 0
    top3: int = 0
    spec_hits: int = 0
    scored: int = 0


class SimulationEngine:
    """Single-run discrete-event simulation over a virtual millisecond clock."""

    def __init__(self, workload_id: str, tools: Mapping[str, ToolModel],
                 scripts: Mapping[str, Callable[[int], AgentScript]],
                 arrivals: ArrivalTrace, *, mode: str, seed: int,
                 pool: PatternPool | None = None,
                 policy: SpeculationPolicy | None = None,
                 r_total: int = 4, spec_budget: int = 4, epoch_ms: float = 1000.0,
                 window_capacity: int = 16, max_candidates: int | None = None,
                 warm_ttl_ms: float = 10_000.0, warm_fraction: float = 0.2,
                 estimate_alpha: float = 0.5, default_duration_ms: float = 1000.0):
        if mode not in (BASELINE, SPECULATIVE):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == SPECULATIVE and (pool is None or policy is None):
            raise ValueError("speculative mode requires a pattern pool and a policy")
        self.workload_id = workload_id
        self.tools = dict(tools)
        self.scripts = dict(scripts)
        self.arrivals = arrivals
        self.mode = mode
        self.seed = seed
        self.pool = pool
        self.policy = policy
        self.window_capacity = window_capacity
        self.max_candidates = max_candidates
        self.warm_ttl_ms = warm_ttl_ms

        self.now = 0.0
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._heap_seq = 0
        costs = {name: model.cost for name, model in self.tools.items()}
        self.estimates = EstimateBook(alpha=estimate_alpha,
                                      default_duration_ms=default_duration_ms,
                                      warm_fraction=warm_fraction, costs=costs)
        self.resources = ResourceState(r_total=r_total, spec_budget=spec_budget,
                                       epoch_ms=epoch_ms)
        self.scheduler = Scheduler(self.resources, launcher=self._launch,
                                   estimates=self.estimates)
        self.predictor = Predictor(pool) if (mode == SPECULATIVE and pool) else None
        self._warm_until: dict[str, float] = {}
        self._requests: list[_RequestState] = []
        self._finished = 0
        self.downgrades = 0

    # -- virtual clock ------------------------------------------------------

    def _at(self, t: float, fn: Callable[[], None]) -> None:
        if t < self.now - 1e-9:
            raise SimulationError(f"event scheduled in the past: {t} < {self.now}")
        self._heap_seq += 1
        heapq.heappush(self._heap, (t, self._heap_seq, fn))

    # -- execution backend ----------------------------------------------------

    def _launch(self, job: Job) -> None:
        model = self.tools.get(job.tool_type)
        if model is None:
            raise SimulationError(f"no tool model for {job.tool_type!r}")
        now = self.now
        if job.level is SpecLevel.WARM_ONLY:
            duration = self.estimates.warm_fraction * model.mean_total_ms()
            ok, result = True, None
        else:
            warm_until = self._warm_until.get(job.tool_type)
            init = 0.0 if (warm_until is not None and now <= warm_until) \
                else model.init_overhead_ms
            ok, result = tool_result(model, job.args, self.seed)
            duration = init + sample_exec_ms(model, job.args, self.seed)
        duration = max(duration, 0.0)

        def complete() -> None:
            # A job preempted mid-run never finished: it must not warm the
            # tool environment when its stale completion event fires.
            if job.state in (JobState.RUNNING, JobState.PROMOTED):
                self._warm_until[job.tool_type] = self.now + self.warm_ttl_ms
            self.scheduler.on_job_finished(job, self.now, ok, result, duration)

        self._at(now + duration, complete)

    # -- agent loop --------------------------------------------------------------

    def _start_request(self, index: int, arrival: Arrival) -> None:
        factory = self.scripts.get(arrival.script_id)
        if factory is None:
            raise SimulationError(f"no script {arrival.script_id!r} in workload")
        script = factory(stable_seed(self.seed, "script", index, arrival.script_id))
        state = _RequestState(
            index=index,
            request_id=f"r{index:04d}",
            script=script,
            session_id=f"r{index:04d}-{arrival.script_id}",
            arrival_ms=arrival.arrival_ms,
            window=PredictionWindow(self.window_capacity) if self.predictor else None,
        )
        self._requests.append(state)
        self._begin_step(state)

    def _begin_step(self, state: _RequestState) -> None:
        script = state.script
        while state.step < len(script.steps):
            step = script.steps[state.step]
            args = step.args_fn(state.history)
            if args is None:
                state.step += 1
                continue
            start = self.now
            end = start + max(step.think_ms, 0.0)
            if end > start:
                state.thinks.append((start, end))
            self._at(end, lambda s=state, a=args: self._do_call(s, a))
            return
        end = self.now + max(script.final_think_ms, 0.0)
        if end > self.now:
            state.thinks.append((self.now, end))
        self._at(end, lambda s=state: self._finish_request(s))

    def _do_call(self, state: _RequestState, args: Any) -> None:
        step = state.script.steps[state.step]
        submitted = self.now
        ticket = self.scheduler.submit_authoritative(step.tool_type, args,
                                                     state.session_id, submitted)
        ticket.on_resolve(lambda t, s=state: self._on_result(s, t))

    def _on_result(self, state: _RequestState, ticket: Ticket) -> None:
        now = ticket.resolved_at
        state.calls.append(_CallMetrics(
            tool_type=ticket.tool_type,
            submitted_at=ticket.submitted_at,
            resolved_at=now,
            how=ticket.how,
            serving_job_id=ticket.serving_job_id,
        ))
        state.history.append((ticket.tool_type, ticket.args, ticket.ok, ticket.result))
        state.results.append({"tool": ticket.tool_type, "ok": ticket.ok,
                              "result": ticket.result})
        if self.predictor is not None:
            self._speculate(state, ticket, now)
        state.step += 1
        self._at(now, lambda s=state: self._begin_step(s))

    def _speculate(self, state: _RequestState, ticket: Ticket, now: float) -> None:
        assert state.window is not None and self.policy is not None
        if state.seen_tool_event:
            state.scored += 1
            predictions = state.last_predictions
            if predictions and predictions[0].tool_type == ticket.tool_type:
                state.top1 += 1
            if ticket.tool_type in {p.tool_type for p in predictions[:3]}:
                state.top3 += 1
            serving = (self.scheduler.jobs.get(ticket.serving_job_id)
                       if ticket.serving_job_id is not None else None)
            if serving is not None and serving.kind is JobKind.SPECULATIVE:
                state.spec_hits += 1
        event = Event(
            session_id=state.session_id, seq=state.seq, kind=EventKind.TOOL_CALL,
            tool_type=ticket.tool_type,
            status=Status.SUCCESS if ticket.ok else Status.FAIL,
            args=ticket.args, result=ticket.result,
            t_start=ticket.submitted_at, t_end=now,
        )
        state.seq += 1
        state.window.observe(event)
        state.seen_tool_event = True
        predictions = self.predictor.predict(state.window, now=now,
                                             max_candidates=self.max_candidates)
        state.last_predictions = predictions
        actions = admit(predictions, self.policy,
                        benefit_of=lambda p: self.estimates.duration(p.tool_type))
        final_actions: list[SpeculativeAction] = []
        for action in actions:
            if action.level is SpecLevel.FULL:
                final_actions.append(action)
                continue
            model = self.tools.get(action.tool_type)
            transformed, downgraded = transform_side_effecting(
                action, dry_run_supported=model.dry_run_supported if model else False)
            if downgraded:
                self.downgrades += 1
            final_actions.append(transformed)
        self.scheduler.submit_speculative_batch(final_actions, state.session_id, now)

    def _finish_request(self, state: _RequestState) -> None:
        state.finished_at = self.now
        self._finished += 1

    # -- run -----------------------------------------------------------------

    def run(self) -> RunReport:
        for index, arrival in enumerate(self.arrivals.arrivals):
            self._at(arrival.arrival_ms,
                     lambda i=index, a=arrival: self._start_request(i, a))
        while self._heap:
            t, _, fn = heapq.heappop(self._heap)
            self.now = t
            fn()
        if self._finished < len(self.arrivals):
            raise SimulationError(self._deadlock_dump())
        return self._build_report()

    def _deadlock_dump(self) -> str:
        unfinished = [s.request_id for s in self._requests if s.finished_at is None]
        running = [(j.id, j.tool_type, j.state.value)
                   for j in self.scheduler.jobs.values()
                   if j.state in (JobState.RUNNING, JobState.PROMOTED)]
        return ("simulation deadlock: no runnable event with unfinished requests "
                f"{unfinished}; pending_auth={len(self.scheduler.pending_auth)}, "
                f"pending_spec={len(self.scheduler.pending_spec)}, running={running}")

    # -- report ----------------------------------------------------------------

    def _build_report(self) -> RunReport:
        waste_by_session: dict[str, float] = {}
        for job in self.scheduler.jobs.values():
            if job.kind is not JobKind.SPECULATIVE or job.dispatched_at is None:
                continue
            wasted = (job.state is JobState.ABORTED
                      or (job.state is JobState.COMPLETED and not job.consumed))
            if wasted and job.finished_at is not None:
                waste_by_session[job.session_id] = (
                    waste_by_session.get(job.session_id, 0.0)
                    + (job.finished_at - job.dispatched_at))

        requests: list[RequestMetrics] = []
        violations = list(self.scheduler.violations)
        for state in sorted(self._requests, key=lambda s: s.index):
            think_total = sum(e - s for s, e in state.thinks)
            stall_total = sum(c.resolved_at - c.submitted_at for c in state.calls)
            e2e = (state.finished_at or self.now) - state.arrival_ms
            if abs(e2e - (think_total + stall_total)) > 1e-6:
                violations.append(
                    f"{state.request_id}: e2e {e2e} != think {think_total} "
                    f"+ stall {stall_total}")
            exec_total = 0.0
            overlap_total = 0.0
            counted_jobs: set[int] = set()
            for call in state.calls:
                job = (self.scheduler.jobs.get(call.serving_job_id)
                       if call.serving_job_id is not None else None)
                if job is None or job.dispatched_at is None or job.finished_at is None:
                    continue
                exec_total += job.finished_at - job.dispatched_at
                if job.kind is JobKind.SPECULATIVE and job.id not in counted_jobs:
                    counted_jobs.add(job.id)
                    overlap_total += _interval_overlap(
                        (job.dispatched_at, job.finished_at), state.thinks)
            requests.append(RequestMetrics(
                request_id=state.request_id,
                script_id=state.script.script_id,
                session_id=state.session_id,
                arrival_ms=state.arrival_ms,
                finish_ms=state.finished_at or self.now,
                e2e_ms=e2e,
                think_ms=think_total,
                tool_exec_ms=exec_total,
                tool_stall_ms=stall_total,
                overlap_ms=overlap_total,
                spec_overhead_ms=waste_by_session.get(state.session_id, 0.0),
                n_calls=len(state.calls),
            ))

        scored = sum(s.scored for s in self._requests)
        prediction = {
            "top1": (sum(s.top1 for s in self._requests) / scored) if scored else 0.0,
            "top3": (sum(s.top3 for s in self._requests) / scored) if scored else 0.0,
            "hit_rate": (sum(s.spec_hits for s in self._requests) / scored) if scored else 0.0,
            "scored_calls": float(scored),
        }
        return RunReport(
            workload_id=self.workload_id,
            mode=self.mode,
            seed=self.seed,
            resources={"r_total": self.resources.r_total,
                       "spec_budget": self.resources.spec_budget,
                       "epoch_ms": self.resources.epoch_ms},
            match_relation=(self.pool.config.match_relation.value
                            if self.pool is not None else None),
            requests=requests,
            prediction=prediction,
            audit=self.scheduler.collect_audit().to_json(),
            invariant_violations=violations,
        )

    def final_results(self) -> dict[str, list[Any]]:
        """Per-request authoritative results, for safety comparisons."""
        return {s.request_id: s.results for s in self._requests}

    def authoritative_dispatch_log(self) -> list[tuple[float, str, str]]:
        """(time, tool, arg_hash) for every authoritative dispatch, in order."""
        return [(rec.t, rec.tool_type, rec.arg_hash) for rec in self.scheduler.log
                if rec.kind == JobKind.AUTHORITATIVE.value
                and rec.state_to == JobState.RUNNING.value]


def _interval_overlap(interval: tuple[float, float],
                      thinks: Sequence[tuple[float, float]]) -> float:
    a, b = interval
    total = 0.0
    for s, e in thinks:
        lo, hi = max(a, s), min(b, e)
        if hi > lo:
            total += hi - lo
    return total
