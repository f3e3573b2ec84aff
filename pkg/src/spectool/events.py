"""Trace event model: events, signatures, sessions, and JSONL ingestion.

A trace is a stream of tool-call and LLM-step events. Context matching never
looks at payloads, only at ``(tool_type, status)`` signatures; payloads are
kept on the event so argument-derivation functions can read them later.
"""

from __future__ import annotations

import hashlib
import json
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Any, Iterable, Iterator

DEFAULT_INACTIVITY_THRESHOLD_MS = 300_000.0


class EventKind(str, Enum):
    TOOL_CALL = "tool_call"
    LLM_STEP = "llm_step"


class Status(str, Enum):
    SUCCESS = "success"
    FAIL = "fail"


@dataclass(frozen=True)
class EventSignature:
    """Payload-stripped descriptor of a tool event: equality is (tool, status) only."""

    tool_type: str
    status: Status

    def __str__(self) -> str:
        return f"({self.tool_type}, {self.status.value})"


@dataclass(frozen=True)
class Event:
    """One tool invocation or LLM step inside a session.

    ``args`` and ``result`` are JSON-like trees (dict/list/scalar). LLM steps
    carry timing only: empty tool_type and empty payloads.
    """

    session_id: str
    seq: int
    kind: EventKind
    tool_type: str
    status: Status
    args: Any
    result: Any
    t_start: float
    t_end: float

    def __post_init__(self) -> None:
        if self.t_start > self.t_end:
            raise ValueError(f"event seq={self.seq}: t_start > t_end")
        if self.kind is EventKind.TOOL_CALL and not self.tool_type:
            raise ValueError(f"event seq={self.seq}: tool_call with empty tool_type")


@dataclass(frozen=True)
class Session:
    session_id: str
    events: tuple[Event, ...]

    def tool_events(self) -> tuple[Event, ...]:
        return tuple(e for e in self.events if e.kind is EventKind.TOOL_CALL)


class SignatureError(ValueError):
    """Raised when a signature is requested for an event that has none."""


def signature_of(event: Event) -> EventSignature:
    """Project an event to its (tool_type, status) signature.

    LLM steps carry no tool signature; asking for one is a caller bug.
    """
    if event.kind is not EventKind.TOOL_CALL:
        raise SignatureError("LLM steps carry no tool signature")
    return EventSignature(event.tool_type, event.status)


# ---------------------------------------------------------------------------
# Canonical payload form and hashing
# ---------------------------------------------------------------------------


def canonical_form(payload: Any) -> Any:
    """Normalize a payload tree for order-independent, type-stable comparison.

    Map keys are sorted lexicographically, integral floats collapse to ints,
    and strings are NFC-normalized. Lists keep their order.
    """
    if isinstance(payload, dict):
        items = [(canonical_form(k), canonical_form(v)) for k, v in payload.items()]
        return {k: v for k, v in sorted(items, key=lambda kv: str(kv[0]))}
    if isinstance(payload, (list, tuple)):
        return [canonical_form(v) for v in payload]
    if isinstance(payload, bool):
        return payload
    if isinstance(payload, float) and payload.is_integer():
        return int(payload)
    if isinstance(payload, str):
        return unicodedata.normalize("NFC", payload)
    return payload


def canonical_json(payload: Any) -> str:
    return json.dumps(canonical_form(payload), sort_keys=True,
                      separators=(",", ":"), ensure_ascii=False)


def canonical_arg_hash(args: Any) -> str:
    """128-bit stable hash of a payload's canonical serialization."""
    digest = hashlib.blake2b(canonical_json(args).encode("utf-8"), digest_size=16)
    return digest.hexdigest()


def values_equal(a: Any, b: Any) -> bool:
    """Equality after canonicalization; distinguishes bools from ints."""
    ca, cb = canonical_form(a), canonical_form(b)
    if isinstance(ca, bool) != isinstance(cb, bool):
        return False
    return ca == cb


def stable_seed(*parts: Any) -> int:
    """Deterministic 64-bit seed derived from the given parts.

    Unlike ``hash()`` this is stable across processes, which keeps simulation
    runs reproducible for a given run seed.
    """
    text = "\x1f".join(canonical_json(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8)
    return int.from_bytes(digest.digest(), "big")


# ---------------------------------------------------------------------------
# JSONL ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IngestError:
    line: int
    message: str


@dataclass
class IngestResult:
    sessions: list[Session]
    errors: list[IngestError] = field(default_factory=list)
    reordered_sessions: int = 0


_REQUIRED_FIELDS = ("session_id", "seq", "kind", "tool", "status", "t_start_ms", "t_end_ms")


def _parse_record(line_no: int, raw: str) -> Event:
    record = json.loads(raw)
    if not isinstance(record, dict):
        raise ValueError("record is not an object")
    missing = [f for f in _REQUIRED_FIELDS if f not in record]
    if missing:
        raise ValueError(f"missing fields: {', '.join(missing)}")
    kind = EventKind(record["kind"])
    status = Status(record["status"])
    return Event(
        session_id=str(record["session_id"]),
        seq=int(record["seq"]),
        kind=kind,
        tool_type=str(record["tool"]),
        status=status,
        args=record.get("args"),
        result=record.get("result"),
        t_start=float(record["t_start_ms"]),
        t_end=float(record["t_end_ms"]),
    )


def _iter_lines(source: str | bytes | IO | Iterable[str | bytes]) -> Iterator[str]:
    if isinstance(source, (str, bytes)):
        text = source.decode("utf-8") if isinstance(source, bytes) else source
        yield from text.splitlines()
        return
    for line in source:
        yield line.decode("utf-8") if isinstance(line, bytes) else line


def ingest_trace(
    source: str | bytes | IO | Iterable[str | bytes],
    inactivity_threshold_ms: float = DEFAULT_INACTIVITY_THRESHOLD_MS,
) -> IngestResult:
    """Parse a JSONL event stream into inactivity-segmented sessions.

    Records may interleave sessions. Malformed lines are tallied with their
    line number and skipped; ingestion continues. Events claimed by one
    session but out of timestamp order are re-sorted by (t_start, seq) and the
    session is counted in ``reordered_sessions``. Whenever the idle gap
    between consecutive events exceeds the threshold the session is split and
    later segments get a ``#<n>`` suffix on their id.
    """
    errors: list[IngestError] = []
    by_session: dict[str, list[Event]] = {}
    order: list[str] = []
    for line_no, raw in enumerate(_iter_lines(source), start=1):
        if not raw.strip():
            continue
        try:
            event = _parse_record(line_no, raw)
        except (ValueError, KeyError, TypeError) as exc:
            errors.append(IngestError(line_no, str(exc)))
            continue
        if event.session_id not in by_session:
            by_session[event.session_id] = []
            order.append(event.session_id)
        by_session[event.session_id].append(event)

    sessions: list[Session] = []
    reordered = 0
    for session_id in order:
        events = by_session[session_id]
        ordered = sorted(events, key=lambda e: (e.t_start, e.seq))
        if [e.seq for e in ordered] != [e.seq for e in events]:
            reordered += 1
        for segment_idx, segment in enumerate(_split_on_gaps(ordered, inactivity_threshold_ms)):
            seg_id = session_id if segment_idx == 0 else f"{session_id}#{segment_idx}"
            if seg_id != session_id:
                segment = [
                    Event(seg_id, e.seq, e.kind, e.tool_type, e.status,
                          e.args, e.result, e.t_start, e.t_end)
                    for e in segment
                ]
            sessions.append(Session(seg_id, tuple(segment)))
    return IngestResult(sessions=sessions, errors=errors, reordered_sessions=reordered)


def _split_on_gaps(events: list[Event], threshold_ms: float) -> Iterator[list[Event]]:
    segment: list[Event] = []
    for event in events:
        if segment and event.t_start - segment[-1].t_end > threshold_ms:
            yield segment
            segment = []
        segment.append(event)
    if segment:
        yield segment


def event_to_record(event: Event) -> dict[str, Any]:
    return {
        "session_id": event.session_id,
        "seq": event.seq,
        "kind": event.kind.value,
        "tool": event.tool_type,
        "status": event.status.value,
        "args": event.args,
        "result": event.result,
        "t_start_ms": event.t_start,
        "t_end_ms": event.t_end,
    }


def write_trace(sessions: Iterable[Session], sink: IO[str]) -> int:
    """Serialize sessions back to the JSONL trace format. Returns line count."""
    n = 0
    for session in sessions:
        for event in session.events:
            sink.write(json.dumps(event_to_record(event), ensure_ascii=False) + "\n")
            n += 1
    return n
