"""Runtime prediction: window maintenance, context matching, hint emission.

Each agent session owns one bounded window of recent events. On every new
event the pool is probed (hash-indexed by the last context signature, so the
cost scales with matching patterns rather than pool size) and every matching
pattern emits a probability-annotated predicted invocation; arbitration is
left to the policy engine.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Any, Sequence

from .events import Event, EventKind, EventSignature, Session, canonical_arg_hash
from .mappings import MappingStructureError, evaluate
from .mining import PatternPool, PatternTuple, match_at

DEFAULT_WINDOW_CAPACITY = 16


class Completeness(str, Enum):
    FULL = "full"
    PARTIAL = "partial"
    TOOL_ONLY = "tool_only"


@dataclass(frozen=True)
class PredictedInvocation:
    tool_type: str
    args: dict[str, Any]
    completeness: Completeness
    probability: float
    source_pattern: str
    created_at: float


class PredictionWindow:
    """Bounded per-session view of recent events."""

    def __init__(self, capacity: int = DEFAULT_WINDOW_CAPACITY):
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self._events: deque[Event] = deque(maxlen=capacity)

    def observe(self, event: Event) -> None:
        self._events.append(event)

    def events(self) -> tuple[Event, ...]:
        return tuple(self._events)

    def tool_events(self) -> tuple[Event, ...]:
        return tuple(e for e in self._events if e.kind is EventKind.TOOL_CALL)

    def __len__(self) -> int:
        return len(self._events)


@dataclass
class PredictDiagnostics:
    structural_errors: int = 0


class Predictor:
    """Matches a validated pattern pool against per-session windows."""

    def __init__(self, pool: PatternPool):
        self.pool = pool
        self._by_last_sig: dict[EventSignature, list[PatternTuple]] = {}
        for pattern in pool.patterns:
            self._by_last_sig.setdefault(pattern.context[-1], []).append(pattern)
        self.diagnostics = PredictDiagnostics()

    def predict(self, window: PredictionWindow, now: float | None = None,
                max_candidates: int | None = None) -> list[PredictedInvocation]:
        """Emit one prediction per matching pattern, best first.

        Output is ordered by probability descending with pattern id as the
        tie-break; ``max_candidates`` (scheduler-supplied) truncates the list.
        """
        stream = window.tool_events()
        if not stream:
            return []
        anchor = len(stream) - 1
        created = now if now is not None else stream[-1].t_end
        candidates = self._by_last_sig.get(
            EventSignature(stream[-1].tool_type, stream[-1].status), ())
        predictions: list[PredictedInvocation] = []
        for pattern in candidates:
            matched = match_at(stream, anchor, pattern.context,
                               self.pool.config.k, self.pool.config.match_relation)
            if matched is None:
                continue
            if pattern.mapping is None:
                args: dict[str, Any] = {}
                completeness = Completeness.TOOL_ONLY
            else:
                try:
                    result = evaluate(pattern.mapping, matched)
                except MappingStructureError:
                    self.diagnostics.structural_errors += 1
                    continue
                args = result.args
                completeness = Completeness.FULL if result.complete else Completeness.PARTIAL
            predictions.append(PredictedInvocation(
                tool_type=pattern.target,
                args=args,
                completeness=completeness,
                probability=pattern.p,
                source_pattern=pattern.pattern_id,
                created_at=created,
            ))
        predictions.sort(key=lambda pr: (-pr.probability, pr.source_pattern))
        if max_candidates is not None:
            predictions = predictions[:max_candidates]
        return predictions


@dataclass(frozen=True)
class AccuracyReport:
    top1: float
    top3: float
    hit_rate: float
    scored_calls: int

    def to_json(self) -> dict[str, Any]:
        return {"top1": self.top1, "top3": self.top3,
                "hit_rate": self.hit_rate, "scored_calls": self.scored_calls}


def score_accuracy(traces: Sequence[Session], pool: PatternPool,
                   window_capacity: int = DEFAULT_WINDOW_CAPACITY,
                   max_candidates: int | None = None) -> AccuracyReport:
    """Replay traces and score prediction quality against the next real call.

    A call is scored when at least one earlier tool event exists in its
    session (the first call has no context to predict from). A hit requires
    some fully parameterized prediction to match both the tool and the
    canonical arguments of the actual invocation.
    """
    predictor = Predictor(pool)
    top1 = top3 = hits = scored = 0
    for session in traces:
        window = PredictionWindow(window_capacity)
        seen_tool_event = False
        for event in session.events:
            if event.kind is not EventKind.TOOL_CALL:
                window.observe(event)
                continue
            if seen_tool_event:
                predictions = predictor.predict(window, max_candidates=max_candidates)
                scored += 1
                if predictions and predictions[0].tool_type == event.tool_type:
                    top1 += 1
                if event.tool_type in {p.tool_type for p in predictions[:3]}:
                    top3 += 1
                actual_hash = canonical_arg_hash(event.args)
                if any(p.completeness is Completeness.FULL
                       and p.tool_type == event.tool_type
                       and canonical_arg_hash(p.args) == actual_hash
                       for p in predictions):
                    hits += 1
            window.observe(event)
            seen_tool_event = True
    if scored == 0:
        return AccuracyReport(0.0, 0.0, 0.0, 0)
    return AccuracyReport(top1 / scored, top3 / scored, hits / scored, scored)
