"""Opportunistic speculative scheduling around an authoritative job stream.

The scheduler owns one consistency domain: the job table, the resource pool,
and the result cache. Authoritative work has strict priority; speculative
jobs run only on slack within a per-epoch budget, are preempted lowest
utility first the moment authoritative demand exceeds free capacity, and are
promoted in place when a matching authoritative request arrives mid-flight.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Sequence

from .events import canonical_arg_hash
from .policy import SpecLevel, SpeculativeAction


class JobKind(str, Enum):
    AUTHORITATIVE = "authoritative"
    SPECULATIVE = "speculative"


class JobState(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    PROMOTED = "promoted"
    COMPLETED = "completed"
    ABORTED = "aborted"


@dataclass
class Job:
    """One authoritative or speculative tool invocation."""

    id: int
    kind: JobKind
    tool_type: str
    args: Any
    arg_hash: str
    session_id: str
    p: float
    benefit_ms: float
    cost: int
    duration_est_ms: float
    submitted_at: float
    level: SpecLevel | None = None
    no_commit: bool = False
    state: JobState = JobState.PENDING
    preemptible: bool = False
    dispatched_at: float | None = None
    finished_at: float | None = None
    result: Any = None
    ok: bool = False
    consumed: bool = False

    def utility(self) -> float:
        return (self.p * self.benefit_ms) / (self.cost * self.duration_est_ms)


@dataclass
class Ticket:
    """Waitable handle for an authoritative submission."""

    tool_type: str
    args: Any
    arg_hash: str
    session_id: str
    submitted_at: float
    resolved: bool = False
    ok: bool = False
    result: Any = None
    resolved_at: float = 0.0
    how: str = ""
    serving_job_id: int | None = None
    _callbacks: list[Callable[["Ticket"], None]] = field(default_factory=list)

    def on_resolve(self, callback: Callable[["Ticket"], None]) -> None:
        if self.resolved:
            callback(self)
        else:
            self._callbacks.append(callback)

    def _resolve(self, now: float, ok: bool, result: Any, how: str,
                 serving_job_id: int | None = None) -> None:
        self.resolved = True
        self.ok = ok
        self.result = result
        self.resolved_at = now
        self.how = how
        self.serving_job_id = serving_job_id
        callbacks, self._callbacks = self._callbacks, []
        for callback in callbacks:
            callback(self)


@dataclass
class ResourceState:
    """Abstract slot pool plus the per-epoch speculation budget."""

    r_total: int
    spec_budget: int
    epoch_ms: float = 1000.0
    r_available: int = field(init=False)
    budget_remaining: int = field(init=False)
    epoch_index: int = field(init=False, default=-1)

    def __post_init__(self) -> None:
        if self.r_total < 1:
            raise ValueError("r_total must be >= 1")
        if self.spec_budget < 0:
            raise ValueError("spec_budget must be >= 0")
        self.r_available = self.r_total
        self.budget_remaining = self.spec_budget

    def refresh_epoch(self, now: float) -> None:
        idx = int(now // self.epoch_ms) if self.epoch_ms > 0 else 0
        if idx != self.epoch_index:
            self.epoch_index = idx
            self.budget_remaining = self.spec_budget


class CacheState(str, Enum):
    IN_FLIGHT = "in_flight"
    DONE = "done"


@dataclass
class CacheEntry:
    state: CacheState
    job_id: int
    created_at: float
    result: Any = None
    ok: bool = False
    no_commit: bool = False


CacheKey = tuple[str, str]


class ResultCache:
    """Unified result cache keyed by tool name and canonical argument hash."""

    def __init__(self) -> None:
        self._entries: dict[CacheKey, CacheEntry] = {}

    def get(self, key: CacheKey) -> CacheEntry | None:
        return self._entries.get(key)

    def put_in_flight(self, key: CacheKey, job_id: int, now: float) -> None:
        self._entries[key] = CacheEntry(CacheState.IN_FLIGHT, job_id, now)

    def complete(self, key: CacheKey, job_id: int, now: float, result: Any,
                 ok: bool, no_commit: bool) -> bool:
        entry = self._entries.get(key)
        if entry is None or entry.job_id != job_id:
            return False
        self._entries[key] = CacheEntry(CacheState.DONE, job_id, now, result, ok, no_commit)
        return True

    def evict(self, key: CacheKey) -> None:
        self._entries.pop(key, None)

    def __len__(self) -> int:
        return len(self._entries)


@dataclass(frozen=True)
class LogRecord:
    t: float
    job_id: int
    kind: str
    state_from: str
    state_to: str
    reason: str
    tool_type: str
    arg_hash: str

    def to_json(self) -> dict[str, Any]:
        return {"t": self.t, "job_id": self.job_id, "kind": self.kind,
                "state_from": self.state_from, "state_to": self.state_to,
                "reason": self.reason, "tool": self.tool_type, "arg_hash": self.arg_hash}


class EstimateBook:
    """Exponentially weighted per-tool duration estimates.

    Feeds the benefit and duration terms of the utility score; resource cost
    per tool is a fixed configured value.
    """

    def __init__(self, alpha: float = 0.5, default_duration_ms: float = 1000.0,
                 warm_fraction: float = 0.2, costs: dict[str, int] | None = None):
        if not 0 < alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        self.alpha = alpha
        self.default_duration_ms = default_duration_ms
        self.warm_fraction = warm_fraction
        self.costs = dict(costs or {})
        self._duration: dict[str, float] = {}
        self._stall_saved: dict[str, float] = {}

    def update(self, tool_type: str, duration_ms: float | None = None,
               stall_saved_ms: float | None = None) -> None:
        if duration_ms is not None:
            self._duration[tool_type] = self._ewma(self._duration.get(tool_type), duration_ms)
        if stall_saved_ms is not None:
            self._stall_saved[tool_type] = self._ewma(self._stall_saved.get(tool_type),
                                                      stall_saved_ms)

    def _ewma(self, current: float | None, sample: float) -> float:
        if current is None:
            return sample
        return self.alpha * sample + (1 - self.alpha) * current

    def duration(self, tool_type: str) -> float:
        return self._duration.get(tool_type, self.default_duration_ms)

    def stall_saved(self, tool_type: str) -> float:
        return self._stall_saved.get(tool_type, 0.0)

    def cost(self, tool_type: str) -> int:
        return self.costs.get(tool_type, 1)


# ---------------------------------------------------------------------------
# Primary scheduling policies
# ---------------------------------------------------------------------------

PrimaryScheduling = Callable[[Sequence[Job], int], Job | None]


def fifo_primary(pending: Sequence[Job], r_available: int) -> Job | None:
    """Default primary policy: strict FIFO, no skip-ahead past a blocked head."""
    if pending and pending[0].cost <= r_available:
        return pending[0]
    return None


def greedy_speculative_selection(jobs: Iterable[Job], slack: int,
                                 budget: int) -> list[Job]:
    """Greedy admission by utility per unit resource-time.

    Jobs are considered in descending utility (ties: higher probability,
    then lower id, i.e. earlier submission) and selected when their cost fits
    both the remaining slack and the remaining budget, so the selected set
    always satisfies the combined cap of slack and budget.
    """
    selected: list[Job] = []
    r, b = slack, budget
    for job in sorted(jobs, key=lambda j: (-j.utility(), -j.p, j.id)):
        if job.cost <= r and job.cost <= b:
            selected.append(job)
            r -= job.cost
            b -= job.cost
    return selected


# ---------------------------------------------------------------------------
# Audit
# ---------------------------------------------------------------------------


@dataclass
class ToolAudit:
    launched: int = 0
    committed: int = 0
    prevented_from_committing: int = 0


@dataclass
class AuditReport:
    spec_launched: int = 0
    spec_aborted: int = 0
    spec_completed: int = 0
    spec_consumed: int = 0
    spec_expired: int = 0
    promotions: int = 0
    cache_hits: int = 0
    joins: int = 0
    cancelled_pending: int = 0
    coalesced: int = 0
    no_commit_completed: int = 0
    committed_results: int = 0
    wasted_spec_ms: float = 0.0
    per_tool: dict[str, ToolAudit] = field(default_factory=dict)

    def to_json(self) -> dict[str, Any]:
        data = {k: v for k, v in self.__dict__.items() if k != "per_tool"}
        data["per_tool"] = {
            tool: {"launched": a.launched, "committed": a.committed,
                   "prevented_from_committing": a.prevented_from_committing}
            for tool, a in sorted(self.per_tool.items())
        }
        return data


@dataclass
class TickDecisions:
    confirmed: list[int] = field(default_factory=list)
    preempted: list[int] = field(default_factory=list)
    dispatched: list[int] = field(default_factory=list)
    launched_spec: list[int] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Scheduler
# ---------------------------------------------------------------------------

Launcher = Callable[[Job], None]


class Scheduler:
    """Event-driven coordinator for authoritative and speculative execution.

    ``launcher`` starts a job on the execution backend; the backend reports
    back through :meth:`on_job_finished`. All mutation happens inside the
    submit paths and :meth:`schedule_tick`, which callers serialize.
    """

    def __init__(self, resources: ResourceState, launcher: Launcher,
                 estimates: EstimateBook | None = None,
                 primary: PrimaryScheduling = fifo_primary):
        self.resources = resources
        self.launcher = launcher
        self.estimates = estimates or EstimateBook()
        self.primary = primary
        self.cache = ResultCache()
        self.jobs: dict[int, Job] = {}
        self.pending_auth: list[Job] = []
        self.pending_spec: list[Job] = []
        self._pending_spec_by_session: dict[str, list[Job]] = {}
        self._tickets: dict[int, list[Ticket]] = {}
        self._ids = itertools.count(1)
        self.log: list[LogRecord] = []
        self.violations: list[str] = []
        self._audit = AuditReport()

    # -- helpers ----------------------------------------------------------

    def _log(self, now: float, job: Job, state_from: JobState | str,
             state_to: JobState | str, reason: str) -> None:
        self.log.append(LogRecord(
            t=now, job_id=job.id, kind=job.kind.value,
            state_from=state_from if isinstance(state_from, str) else state_from.value,
            state_to=state_to if isinstance(state_to, str) else state_to.value,
            reason=reason, tool_type=job.tool_type, arg_hash=job.arg_hash))

    def _tool_audit(self, tool_type: str) -> ToolAudit:
        return self._audit.per_tool.setdefault(tool_type, ToolAudit())

    def _running_spec(self) -> list[Job]:
        return [j for j in self.jobs.values()
                if j.kind is JobKind.SPECULATIVE and j.state is JobState.RUNNING]

    def _auth_demand(self) -> int:
        return sum(j.cost for j in self.pending_auth)

    # -- authoritative path -------------------------------------------------

    def submit_authoritative(self, tool_type: str, args: Any, session_id: str,
                             now: float) -> Ticket:
        """Submit a real tool invocation; returns a waitable ticket.

        Completed speculative results are served immediately, in-flight ones
        are promoted or joined, failed or no-commit entries are discarded and
        a fresh execution is queued.
        """
        arg_hash = canonical_arg_hash(args)
        ticket = Ticket(tool_type=tool_type, args=args, arg_hash=arg_hash,
                        session_id=session_id, submitted_at=now)
        key = (tool_type, arg_hash)

        self._cancel_matching_pending_spec(key, now)
        entry = self.cache.get(key)
        if entry is not None:
            if entry.state is CacheState.DONE:
                if entry.ok and not entry.no_commit:
                    producer = self.jobs.get(entry.job_id)
                    if producer is not None and producer.kind is JobKind.SPECULATIVE \
                            and not producer.consumed:
                        producer.consumed = True
                        self._audit.spec_consumed += 1
                    self._audit.cache_hits += 1
                    self._audit.committed_results += 1
                    if producer is not None:
                        self._tool_audit(tool_type).committed += 1
                    ticket._resolve(now, True, entry.result, "cache_hit", entry.job_id)
                    return ticket
                # Failed or no-commit speculative result: never served.
                self.cache.evict(key)
            else:
                job = self.jobs.get(entry.job_id)
                if job is not None and job.state is JobState.RUNNING \
                        and job.kind is JobKind.SPECULATIVE and not job.no_commit:
                    self._promote(job, ticket, now)
                    return ticket
                if job is not None and not job.no_commit \
                        and job.state in (JobState.PENDING, JobState.RUNNING, JobState.PROMOTED):
                    self._tickets.setdefault(job.id, []).append(ticket)
                    self._audit.joins += 1
                    self._log(now, job, job.state, job.state, "joined")
                    return ticket
                if job is not None and job.no_commit and job.state is JobState.RUNNING:
                    # A dry run cannot satisfy the real call; discard it.
                    self._abort(job, now, "superseded_by_authoritative")

        job = Job(id=next(self._ids), kind=JobKind.AUTHORITATIVE, tool_type=tool_type,
                  args=args, arg_hash=arg_hash, session_id=session_id, p=1.0,
                  benefit_ms=0.0, cost=self.estimates.cost(tool_type),
                  duration_est_ms=self.estimates.duration(tool_type),
                  submitted_at=now, preemptible=False)
        if job.cost > self.resources.r_total:
            raise ValueError(f"job cost {job.cost} exceeds total capacity "
                             f"{self.resources.r_total}")
        self.jobs[job.id] = job
        self._tickets[job.id] = [ticket]
        self.pending_auth.append(job)
        # Register the key immediately so same-key submissions join this job
        # and speculative admissions coalesce against it.
        self.cache.put_in_flight(key, job.id, now)
        self._log(now, job, "", JobState.PENDING, "submitted")
        self.schedule_tick(now)
        return ticket

    def _promote(self, job: Job, ticket: Ticket, now: float) -> None:
        self._log(now, job, job.state, JobState.PROMOTED, "promoted")
        job.state = JobState.PROMOTED
        job.preemptible = False
        job.consumed = True
        self._tickets.setdefault(job.id, []).append(ticket)
        self._audit.promotions += 1
        self._audit.spec_consumed += 1

    def _cancel_matching_pending_spec(self, key: CacheKey, now: float) -> None:
        for job in list(self.pending_spec):
            if (job.tool_type, job.arg_hash) == key:
                self._drop_pending_spec(job, now, "superseded_by_authoritative")

    # -- speculative path ----------------------------------------------------

    def submit_speculative_batch(self, actions: Sequence[SpeculativeAction],
                                 session_id: str, now: float) -> list[Job]:
        """Enqueue a session's freshly admitted actions.

        The session's previously pending (never launched) speculative jobs
        are superseded: predictions target the next call, so an older batch
        is stale once a newer one exists. Duplicate keys already covered by
        the cache or the job table are coalesced away.
        """
        for stale in list(self._pending_spec_by_session.get(session_id, [])):
            self._drop_pending_spec(stale, now, "stale_prediction")
        jobs: list[Job] = []
        for action in actions:
            job = self._admit_action(action, session_id, now)
            if job is not None:
                jobs.append(job)
        if jobs:
            self.schedule_tick(now)
        return jobs

    def _admit_action(self, action: SpeculativeAction, session_id: str,
                      now: float) -> Job | None:
        prediction = action.prediction
        tool = prediction.tool_type
        mean = self.estimates.duration(tool)
        if action.level is SpecLevel.WARM_ONLY:
            # Warm-ups never produce cacheable results; the synthetic hash
            # only deduplicates concurrent warm-ups of the same tool.
            key = (tool, "warm")
            duration = max(self.estimates.warm_fraction * mean, 1e-9)
            benefit = self.estimates.warm_fraction * mean
            args: Any = {}
        else:
            key = (tool, canonical_arg_hash(prediction.args))
            duration = max(mean, 1e-9)
            benefit = mean if action.level is SpecLevel.FULL \
                else self.estimates.warm_fraction * mean
            args = prediction.args

        if action.level is not SpecLevel.WARM_ONLY:
            entry = self.cache.get(key)
            if entry is not None:
                if entry.state is CacheState.IN_FLIGHT or (entry.ok and not entry.no_commit):
                    self._audit.coalesced += 1
                    return None
                if entry.no_commit and action.level is SpecLevel.FULL:
                    self.cache.evict(key)
                else:
                    self._audit.coalesced += 1
                    return None
        if any((j.tool_type, j.arg_hash) == key for j in self.pending_spec) \
                or any((j.tool_type, j.arg_hash) == key for j in self._running_spec()):
            self._audit.coalesced += 1
            return None

        job = Job(id=next(self._ids), kind=JobKind.SPECULATIVE, tool_type=tool,
                  args=args, arg_hash=key[1], session_id=session_id,
                  p=prediction.probability, benefit_ms=benefit,
                  cost=self.estimates.cost(tool), duration_est_ms=duration,
                  submitted_at=now, level=action.level, no_commit=action.no_commit,
                  preemptible=True)
        if job.cost > self.resources.r_total:
            return None
        self.jobs[job.id] = job
        self.pending_spec.append(job)
        self._pending_spec_by_session.setdefault(session_id, []).append(job)
        self._log(now, job, "", JobState.PENDING, f"predicted:{prediction.source_pattern}")
        return job

    def _drop_pending_spec(self, job: Job, now: float, reason: str) -> None:
        if job in self.pending_spec:
            self.pending_spec.remove(job)
            session_jobs = self._pending_spec_by_session.get(job.session_id, [])
            if job in session_jobs:
                session_jobs.remove(job)
            job.state = JobState.ABORTED
            self._audit.cancelled_pending += 1
            self._log(now, job, JobState.PENDING, JobState.ABORTED, reason)

    # -- core loop ------------------------------------------------------------

    def schedule_tick(self, now: float) -> TickDecisions:
        """Run the four-stage decision loop at one instant."""
        self.resources.refresh_epoch(now)
        decisions = TickDecisions()

        # Stage 1: confirm pending authoritative jobs against speculative work.
        for job in list(self.pending_auth):
            key = (job.tool_type, job.arg_hash)
            entry = self.cache.get(key)
            if entry is None:
                continue
            if entry.state is CacheState.DONE:
                if entry.ok and not entry.no_commit:
                    self.pending_auth.remove(job)
                    producer = self.jobs.get(entry.job_id)
                    if producer is not None and producer.kind is JobKind.SPECULATIVE \
                            and not producer.consumed:
                        producer.consumed = True
                        self._audit.spec_consumed += 1
                    self._audit.cache_hits += 1
                    self._audit.committed_results += 1
                    self._tool_audit(job.tool_type).committed += 1
                    job.state = JobState.COMPLETED
                    job.finished_at = now
                    self._log(now, job, JobState.PENDING, JobState.COMPLETED, "cache_hit")
                    self._resolve_tickets(job, now, True, entry.result, "cache_hit",
                                          serving_job_id=entry.job_id)
                    decisions.confirmed.append(job.id)
                else:
                    self.cache.evict(key)
            elif entry.job_id != job.id:
                running = self.jobs.get(entry.job_id)
                if running is not None and running.kind is JobKind.SPECULATIVE \
                        and running.state is JobState.RUNNING and not running.no_commit:
                    self.pending_auth.remove(job)
                    ticket_list = self._tickets.pop(job.id, [])
                    job.state = JobState.COMPLETED
                    self._log(now, job, JobState.PENDING, JobState.COMPLETED,
                              "confirmed_into_spec_job")
                    for ticket in ticket_list:
                        if running.state is JobState.RUNNING:
                            self._promote(running, ticket, now)
                        else:
                            self._tickets.setdefault(running.id, []).append(ticket)
                    decisions.confirmed.append(job.id)

        # Stage 2: free resources for authoritative demand, lowest utility first.
        while self._auth_demand() > self.resources.r_available:
            victims = [j for j in self._running_spec() if j.preemptible]
            if not victims:
                break
            victim = min(victims, key=lambda j: (j.utility(), -j.id))
            self._abort(victim, now, "preempted")
            decisions.preempted.append(victim.id)

        # Stage 3: primary scheduling of authoritative jobs (default FIFO).
        while True:
            job = self.primary(self.pending_auth, self.resources.r_available)
            if job is None:
                break
            self.pending_auth.remove(job)
            self._dispatch(job, now)
            decisions.dispatched.append(job.id)

        # Stage 4: opportunistic speculative launches on slack, within budget.
        if not self.pending_auth and self.pending_spec:
            chosen = greedy_speculative_selection(
                self.pending_spec, self.resources.r_available,
                self.resources.budget_remaining)
            for job in chosen:
                self._drop_from_pending_spec_lists(job)
                self.resources.budget_remaining -= job.cost
                if job.level is not SpecLevel.WARM_ONLY:
                    self.cache.put_in_flight((job.tool_type, job.arg_hash), job.id, now)
                self._dispatch(job, now)
                self._audit.spec_launched += 1
                self._tool_audit(job.tool_type).launched += 1
                decisions.launched_spec.append(job.id)

        self._check_invariants(now)
        return decisions

    def _drop_from_pending_spec_lists(self, job: Job) -> None:
        self.pending_spec.remove(job)
        session_jobs = self._pending_spec_by_session.get(job.session_id, [])
        if job in session_jobs:
            session_jobs.remove(job)

    def _dispatch(self, job: Job, now: float) -> None:
        self.resources.r_available -= job.cost
        job.state = JobState.RUNNING
        job.dispatched_at = now
        self._log(now, job, JobState.PENDING, JobState.RUNNING, "dispatch")
        self.launcher(job)

    def _abort(self, job: Job, now: float, reason: str) -> None:
        self._log(now, job, job.state, JobState.ABORTED, reason)
        job.state = JobState.ABORTED
        job.finished_at = now
        self.resources.r_available += job.cost
        if job.kind is JobKind.SPECULATIVE:
            self._audit.spec_aborted += 1
            if job.dispatched_at is not None:
                self._audit.wasted_spec_ms += now - job.dispatched_at
            if job.level is not SpecLevel.WARM_ONLY:
                entry = self.cache.get((job.tool_type, job.arg_hash))
                if entry is not None and entry.job_id == job.id:
                    self.cache.evict((job.tool_type, job.arg_hash))

    # -- completion ------------------------------------------------------------

    def on_job_finished(self, job: Job, now: float, ok: bool, result: Any,
                        duration_ms: float) -> None:
        """Execution backend callback; ignores aborted jobs."""
        if job.state not in (JobState.RUNNING, JobState.PROMOTED):
            return
        state_from = job.state
        job.state = JobState.COMPLETED
        job.finished_at = now
        job.result = result
        job.ok = ok
        self.resources.r_available += job.cost
        if job.level is not SpecLevel.WARM_ONLY:
            self.estimates.update(job.tool_type, duration_ms=duration_ms)

        if job.kind is JobKind.AUTHORITATIVE:
            self._log(now, job, state_from, JobState.COMPLETED,
                      "completed" if ok else "failed")
            self.cache.complete((job.tool_type, job.arg_hash), job.id, now,
                                result, ok, no_commit=False)
            self._resolve_tickets(job, now, ok, result, "executed")
        elif state_from is JobState.PROMOTED:
            self._log(now, job, state_from, JobState.COMPLETED,
                      "completed" if ok else "failed")
            self._audit.spec_completed += 1
            self._audit.committed_results += 1
            self._tool_audit(job.tool_type).committed += 1
            self.cache.complete((job.tool_type, job.arg_hash), job.id, now,
                                result, ok, no_commit=False)
            self._resolve_tickets(job, now, ok, result, "promoted")
        else:
            self._log(now, job, state_from, JobState.COMPLETED,
                      "completed" if ok else "failed")
            self._audit.spec_completed += 1
            if job.no_commit:
                self._audit.no_commit_completed += 1
                self._tool_audit(job.tool_type).prevented_from_committing += 1
            if job.level is not SpecLevel.WARM_ONLY:
                self.cache.complete((job.tool_type, job.arg_hash), job.id, now,
                                    result, ok, no_commit=job.no_commit)
        self.schedule_tick(now)

    def _resolve_tickets(self, job: Job, now: float, ok: bool, result: Any,
                         how: str, serving_job_id: int | None = None) -> None:
        serving = serving_job_id if serving_job_id is not None else job.id
        for ticket in self._tickets.pop(job.id, []):
            ticket._resolve(now, ok, result, how, serving)

    # -- estimates and audit -----------------------------------------------------

    def update_estimates(self, tool_type: str, duration_ms: float | None = None,
                         stall_saved_ms: float | None = None) -> None:
        self.estimates.update(tool_type, duration_ms=duration_ms,
                              stall_saved_ms=stall_saved_ms)

    def collect_audit(self) -> AuditReport:
        expired = 0
        wasted = self._audit.wasted_spec_ms
        for job in self.jobs.values():
            if job.kind is JobKind.SPECULATIVE and job.state is JobState.COMPLETED \
                    and not job.consumed:
                expired += 1
                if job.dispatched_at is not None and job.finished_at is not None:
                    wasted += job.finished_at - job.dispatched_at
        self._audit.spec_expired = expired
        self._audit.wasted_spec_ms = wasted
        return self._audit

    # -- invariants ----------------------------------------------------------------

    def _check_invariants(self, now: float) -> None:
        held = sum(j.cost for j in self.jobs.values()
                   if j.state in (JobState.RUNNING, JobState.PROMOTED))
        if held + self.resources.r_available != self.resources.r_total:
            self.violations.append(
                f"t={now}: resource accounting broken "
                f"(held={held}, avail={self.resources.r_available})")
        spec_held = sum(j.cost for j in self._running_spec())
        auth_held = held - spec_held
        if spec_held > self.resources.r_total - auth_held:
            self.violations.append(f"t={now}: speculative allocation exceeds slack")
        if self.resources.budget_remaining < 0:
            self.violations.append(f"t={now}: speculation budget overdrawn")
        if self.pending_auth and any(j.preemptible for j in self._running_spec()):
            self.violations.append(
                f"t={now}: authoritative work pending while preemptible "
                f"speculative jobs hold resources")
