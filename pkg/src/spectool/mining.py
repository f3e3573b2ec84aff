"""Pattern mining: frequent contexts per target tool, scored by validation.

For every tool with enough support, the miner collects the signature windows
immediately preceding its invocations, enumerates frequent order-preserving
subsequences as candidate contexts, infers a value mapping from the concrete
occurrences, and keeps ``(context, target, mapping, p)`` tuples whose
empirical confidence clears the threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import IO, Any, Iterable, Sequence

from .events import (
    Event,
    EventSignature,
    Session,
    Status,
    canonical_arg_hash,
    signature_of,
    values_equal,
)
from .mappings import (
    DEFAULT_VALIDATION_FRACTION,
    MatchedContext,
    ValueMapping,
    evaluate,
    infer_mapping,
    mapping_from_json,
    mapping_to_json,
)

POOL_FILE_VERSION = 1

Context = tuple[EventSignature, ...]


class MatchRelation(str, Enum):
    """How a pattern context is matched against recent events.

    The mining windows are contiguous, but the runtime matches contexts
    against a suffix of the live event stream; both readings are supported
    and recorded in pool files and run reports.
    """

    ANCHORED_SUBSEQUENCE = "anchored_subsequence"
    CONTIGUOUS_SUFFIX = "contiguous_suffix"


@dataclass(frozen=True)
class MiningConfig:
    k: int = 3
    sigma: int = 5
    tau: float = 0.5
    validation_fraction: float = DEFAULT_VALIDATION_FRACTION
    match_relation: MatchRelation = MatchRelation.ANCHORED_SUBSEQUENCE

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.sigma < 1:
            raise ValueError("sigma must be >= 1")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must be in (0, 1]")


@dataclass(frozen=True)
class PatternTuple:
    context: Context
    target: str
    mapping: ValueMapping | None
    p: float
    support: int

    def __post_init__(self) -> None:
        if not self.context:
            raise ValueError("pattern context must be non-empty")
        if not 0 < self.p <= 1:
            raise ValueError("pattern probability must be in (0, 1]")

    @cached_property
    def pattern_id(self) -> str:
        """Stable content-derived id; equal tuples share it across processes."""
        payload = {
            "context": [[s.tool_type, s.status.value] for s in self.context],
            "target": self.target,
            "mapping": mapping_to_json(self.mapping) if self.mapping else None,
        }
        return "p" + canonical_arg_hash(payload)[:12]


@dataclass(frozen=True)
class PatternPool:
    config: MiningConfig
    patterns: tuple[PatternTuple, ...]

    def __len__(self) -> int:
        return len(self.patterns)


def _sort_key(p: PatternTuple):
    return (
        -p.p,
        -len(p.context),
        p.target,
        tuple((s.tool_type, s.status.value) for s in p.context),
    )


# ---------------------------------------------------------------------------
# Context matching
# ---------------------------------------------------------------------------


def match_at(stream: Sequence[Event], anchor: int, context: Context, k: int,
             relation: MatchRelation) -> MatchedContext | None:
    """Match ``context`` against the tool-event stream, anchored at ``anchor``.

    Anchored-subsequence matching requires the last context signature to
    equal the anchor's signature and the rest to embed (rightmost embedding)
    within the ``k`` events ending at the anchor. Contiguous-suffix matching
    requires signature-exact equality with the slice ending at the anchor.
    """
    n = len(context)
    if n == 0 or anchor >= len(stream):
        return None
    if signature_of(stream[anchor]) != context[-1]:
        return None
    if relation is MatchRelation.CONTIGUOUS_SUFFIX:
        start = anchor - n + 1
        if start < 0:
            return None
        slice_ = stream[start:anchor + 1]
        if any(signature_of(e) != s for e, s in zip(slice_, context)):
            return None
        return MatchedContext(events=tuple(slice_), history=tuple(slice_))

    lo = max(0, anchor - k + 1)
    matched: list[Event] = [stream[anchor]]
    first_pos = anchor
    j = n - 2
    pos = anchor - 1
    while j >= 0 and pos >= lo:
        if signature_of(stream[pos]) == context[j]:
            matched.append(stream[pos])
            first_pos = pos
            j -= 1
        pos -= 1
    if j >= 0:
        return None
    matched.reverse()
    return MatchedContext(events=tuple(matched), history=tuple(stream[first_pos:anchor + 1]))


# ---------------------------------------------------------------------------
# Frequent-context enumeration
# ---------------------------------------------------------------------------


def mine_frequent_subsequences(windows: Sequence[Sequence[EventSignature]],
                               sigma: int) -> dict[Context, int]:
    """All order-preserving subsequences supported by >= sigma windows.

    Support counts each window at most once, regardless of how many times a
    subsequence embeds in it.
    """
    counts: dict[Context, int] = {}
    for window in windows:
        for sub in _distinct_subsequences(tuple(window)):
            counts[sub] = counts.get(sub, 0) + 1
    return {c: n for c, n in counts.items() if n >= sigma}


def _distinct_subsequences(window: Context) -> set[Context]:
    subs: set[Context] = set()
    n = len(window)
    for mask in range(1, 1 << n):
        subs.add(tuple(window[i] for i in range(n) if mask & (1 << i)))
    return subs


def _frequent_suffixes(windows: Sequence[Sequence[EventSignature]],
                       sigma: int) -> dict[Context, int]:
    counts: dict[Context, int] = {}
    for window in windows:
        w = tuple(window)
        for start in range(len(w)):
            suffix = w[start:]
            counts[suffix] = counts.get(suffix, 0) + 1
    return {c: n for c, n in counts.items() if n >= sigma}


# ---------------------------------------------------------------------------
# Mining and validation
# ---------------------------------------------------------------------------


def mapping_holds(mapping: ValueMapping, matched: MatchedContext, actual: Event) -> bool:
    """True when every binding resolves and equals the actual argument."""
    result = evaluate(mapping, matched)
    if result.unbound:
        return False
    if not isinstance(actual.args, dict):
        return False
    for name, value in result.args.items():
        if name not in actual.args or not values_equal(value, actual.args[name]):
            return False
    return True


def _collect_occurrences(streams: Sequence[Sequence[Event]], context: Context,
                         cfg: MiningConfig) -> tuple[list[MatchedContext], list[tuple[MatchedContext, Event]]]:
    matches: list[MatchedContext] = []
    followed: list[tuple[MatchedContext, Event]] = []
    for stream in streams:
        for anchor in range(len(stream)):
            matched = match_at(stream, anchor, context, cfg.k, cfg.match_relation)
            if matched is None:
                continue
            matches.append(matched)
            if anchor + 1 < len(stream):
                followed.append((matched, stream[anchor + 1]))
    return matches, followed


def validate(context: Context, target: str, mapping: ValueMapping | None,
             traces: Sequence[Session], cfg: MiningConfig | None = None) -> float:
    """Empirical confidence: context matches followed by the target where
    the mapping holds, over all context matches."""
    cfg = cfg or MiningConfig()
    streams = [s.tool_events() for s in traces]
    matches, followed = _collect_occurrences(streams, context, cfg)
    if not matches:
        raise ValueError("context has no matches in the given traces")
    hits = 0
    for matched, nxt in followed:
        if nxt.tool_type != target:
            continue
        if mapping is None or mapping_holds(mapping, matched, nxt):
            hits += 1
    return hits / len(matches)


def mine(traces: Sequence[Session], cfg: MiningConfig | None = None) -> list[PatternTuple]:
    """Run the full mining pipeline over the traces.

    Output is sorted by confidence descending, longer contexts first on ties.
    """
    cfg = cfg or MiningConfig()
    if not traces:
        raise ValueError("traces must be non-empty")
    streams = [s.tool_events() for s in traces]

    occurrences_by_tool: dict[str, list[tuple[int, int]]] = {}
    for s_idx, stream in enumerate(streams):
        for j, event in enumerate(stream):
            occurrences_by_tool.setdefault(event.tool_type, []).append((s_idx, j))

    patterns: list[PatternTuple] = []
    for target in sorted(occurrences_by_tool):
        positions = occurrences_by_tool[target]
        if len(positions) < cfg.sigma:
            continue
        windows = [
            [signature_of(e) for e in streams[s_idx][max(0, j - cfg.k):j]]
            for s_idx, j in positions
        ]
        if cfg.match_relation is MatchRelation.ANCHORED_SUBSEQUENCE:
            frequent = mine_frequent_subsequences(windows, cfg.sigma)
        else:
            frequent = _frequent_suffixes(windows, cfg.sigma)
        for context in sorted(frequent, key=lambda c: (len(c), [(s.tool_type, s.status.value) for s in c])):
            matches, followed = _collect_occurrences(streams, context, cfg)
            if not matches:
                continue
            occ = [(m, nxt) for m, nxt in followed if nxt.tool_type == target]
            mapping = infer_mapping(occ, cfg.validation_fraction) if len(occ) >= 2 else None
            if mapping is None:
                hits = len(occ)
            else:
                hits = sum(1 for m, nxt in occ if mapping_holds(mapping, m, nxt))
            p = hits / len(matches)
            if p >= cfg.tau:
                patterns.append(PatternTuple(context=context, target=target,
                                             mapping=mapping, p=p,
                                             support=frequent[context]))
    patterns.sort(key=_sort_key)
    return patterns


def mine_pool(traces: Sequence[Session], cfg: MiningConfig | None = None) -> PatternPool:
    cfg = cfg or MiningConfig()
    return PatternPool(config=cfg, patterns=tuple(mine(traces, cfg)))


# ---------------------------------------------------------------------------
# Pool file round-trip
# ---------------------------------------------------------------------------


class PoolFormatError(ValueError):
    pass


def _pattern_to_json(p: PatternTuple) -> dict[str, Any]:
    return {
        "context": [{"tool": s.tool_type, "status": s.status.value} for s in p.context],
        "target": p.target,
        "mapping": mapping_to_json(p.mapping) if p.mapping is not None else None,
        "p": p.p,
        "support": p.support,
    }


def pool_to_json(pool: PatternPool) -> dict[str, Any]:
    return {
        "version": POOL_FILE_VERSION,
        "config": {
            "k": pool.config.k,
            "sigma": pool.config.sigma,
            "tau": pool.config.tau,
            "validation_fraction": pool.config.validation_fraction,
            "match_relation": pool.config.match_relation.value,
        },
        "patterns": [_pattern_to_json(p) for p in pool.patterns],
    }


def save_pool(pool: PatternPool, sink: IO[str] | str) -> None:
    text = json.dumps(pool_to_json(pool), sort_keys=True, indent=2) + "\n"
    if isinstance(sink, str):
        with open(sink, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sink.write(text)


def _context_from_json(items: Iterable[Any]) -> Context:
    context = []
    for item in items:
        try:
            context.append(EventSignature(str(item["tool"]), Status(item["status"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise PoolFormatError(f"bad context element {item!r}: {exc}") from exc
    return tuple(context)


def _pattern_from_json(obj: Any) -> PatternTuple:
    try:
        context = _context_from_json(obj["context"])
        target = str(obj["target"])
        raw_mapping = obj.get("mapping")
        if raw_mapping is None:
            mapping = None
        elif isinstance(raw_mapping, dict):
            # Hand-written convenience form: {arg_name: expr-or-alias}.
            mapping = mapping_from_json(
                [{"arg": k, "expr": v} for k, v in raw_mapping.items()], context)
        else:
            mapping = mapping_from_json(raw_mapping, context)
        return PatternTuple(context=context, target=target, mapping=mapping,
                            p=float(obj["p"]), support=int(obj.get("support", 0)))
    except PoolFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise PoolFormatError(f"bad pattern entry: {exc}") from exc


def load_pool(source: IO[str] | str) -> PatternPool:
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = source.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PoolFormatError(f"malformed pool file: {exc}") from exc
    if not isinstance(obj, dict):
        raise PoolFormatError("pool file must be a JSON object")
    version = obj.get("version")
    if version != POOL_FILE_VERSION:
        raise PoolFormatError(f"unsupported pool file version: {version!r}")
    raw_cfg = obj.get("config", {})
    cfg = MiningConfig(
        k=int(raw_cfg.get("k", 3)),
        sigma=int(raw_cfg.get("sigma", 5)),
        tau=float(raw_cfg.get("tau", 0.5)),
        validation_fraction=float(raw_cfg.get("validation_fraction", DEFAULT_VALIDATION_FRACTION)),
        match_relation=MatchRelation(raw_cfg.get("match_relation",
                                                 MatchRelation.ANCHORED_SUBSEQUENCE.value)),
    )
    patterns = tuple(_pattern_from_json(item) for item in obj.get("patterns", []))
    return PatternPool(config=cfg, patterns=patterns)
