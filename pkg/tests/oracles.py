"""Independent reference implementations used as test oracles.

Everything here is written as plain nested loops over signature tuples so it
shares no code path with the production miner or predictor beyond the data
types themselves.
"""

from __future__ import annotations

from itertools import product
from typing import Sequence

from spectool.events import EventKind, Session
from spectool.mining import MatchRelation, MiningConfig

Sig = tuple[str, str]


def _streams(sessions: Sequence[Session]) -> list[list[Sig]]:
    out = []
    for session in sessions:
        out.append([(e.tool_type, e.status.value) for e in session.events
                    if e.kind is EventKind.TOOL_CALL])
    return out


def _contains_subsequence(window: Sequence[Sig], ctx: Sequence[Sig]) -> bool:
    i = 0
    for sig in window:
        if i < len(ctx) and sig == ctx[i]:
            i += 1
    return i == len(ctx)


def _anchored_match(stream: Sequence[Sig], anchor: int, ctx: Sequence[Sig],
                    k: int) -> bool:
    if stream[anchor] != ctx[-1]:
        return False
    lo = max(0, anchor - k + 1)
    j = len(ctx) - 2
    pos = anchor - 1
    while j >= 0 and pos >= lo:
        if stream[pos] == ctx[j]:
            j -= 1
        pos -= 1
    return j < 0


def _suffix_match(stream: Sequence[Sig], anchor: int, ctx: Sequence[Sig]) -> bool:
    start = anchor - len(ctx) + 1
    if start < 0:
        return False
    return tuple(stream[start:anchor + 1]) == tuple(ctx)


def brute_force_mine(sessions: Sequence[Session], cfg: MiningConfig):
    """Exhaustive reference miner over the full context space.

    Enumerates every signature sequence of length 1..k over the observed
    alphabet, so it cannot miss a candidate the production miner should have
    found. Intended for mapping-free corpora: p is the plain counting ratio.
    """
    streams = _streams(sessions)
    alphabet = sorted({sig for stream in streams for sig in stream})
    targets: dict[str, list[tuple[int, int]]] = {}
    for s_idx, stream in enumerate(streams):
        for j, sig in enumerate(stream):
            targets.setdefault(sig[0], []).append((s_idx, j))

    results = []
    for target in sorted(targets):
        positions = targets[target]
        if len(positions) < cfg.sigma:
            continue
        windows = [streams[s][max(0, j - cfg.k):j] for s, j in positions]
        for length in range(1, cfg.k + 1):
            for ctx in product(alphabet, repeat=length):
                if cfg.match_relation is MatchRelation.ANCHORED_SUBSEQUENCE:
                    support = sum(1 for w in windows if _contains_subsequence(w, ctx))
                else:
                    support = sum(1 for w in windows
                                  if len(w) >= length and tuple(w[-length:]) == ctx)
                if support < cfg.sigma:
                    continue
                matches = 0
                followed = 0
                for stream in streams:
                    for anchor in range(len(stream)):
                        if cfg.match_relation is MatchRelation.ANCHORED_SUBSEQUENCE:
                            hit = _anchored_match(stream, anchor, ctx, cfg.k)
                        else:
                            hit = _suffix_match(stream, anchor, ctx)
                        if not hit:
                            continue
                        matches += 1
                        if anchor + 1 < len(stream) and stream[anchor + 1][0] == target:
                            followed += 1
                if matches == 0:
                    continue
                p = followed / matches
                if p >= cfg.tau:
                    results.append((ctx, target, p, support))
    results.sort(key=lambda r: (-r[2], -len(r[0]), r[1], r[0]))
    return results


def brute_force_subsequences(windows: Sequence[Sequence[Sig]], sigma: int):
    """Reference frequent-subsequence counts via exhaustive enumeration."""
    alphabet = sorted({sig for w in windows for sig in w})
    max_len = max((len(w) for w in windows), default=0)
    counts = {}
    for length in range(1, max_len + 1):
        for ctx in product(alphabet, repeat=length):
            support = sum(1 for w in windows if _contains_subsequence(w, ctx))
            if support >= sigma:
                counts[ctx] = support
    return counts


def best_speculative_subset(jobs, cap: int) -> float:
    """Exhaustive optimum of the budgeted-selection objective."""
    n = len(jobs)
    best = 0.0
    for mask in range(1 << n):
        cost = 0
        value = 0.0
        for i in range(n):
            if mask & (1 << i):
                cost += jobs[i].cost
                value += jobs[i].p * jobs[i].benefit_ms
        if cost <= cap and value > best:
            best = value
    return best


def replay_prediction_metrics(sessions: Sequence[Session], pool, window_capacity=16):
    """Independent recount of top-1 / top-3 / hit-rate over a trace replay.

    Re-implements windowing and context matching over plain signature tuples;
    only mapping evaluation is shared with the production code (it is the
    semantic under test elsewhere).
    """
    from spectool.events import canonical_arg_hash
    from spectool.mappings import MatchedContext, evaluate

    k = pool.config.k
    top1 = top3 = hits = scored = 0
    for session in sessions:
        all_events = list(session.events)
        seen_tool = 0
        for f, event in enumerate(all_events):
            if event.kind is not EventKind.TOOL_CALL:
                continue
            if seen_tool == 0:
                seen_tool += 1
                continue
            seen_tool += 1
            window_events = all_events[max(0, f - window_capacity):f]
            recent = [e for e in window_events if e.kind is EventKind.TOOL_CALL]
            if not recent:
                scored += 1
                continue
            sigs = [(e.tool_type, e.status.value) for e in recent]
            anchor = len(sigs) - 1
            candidates = []
            for pattern in pool.patterns:
                ctx = [(s.tool_type, s.status.value) for s in pattern.context]
                if pool.config.match_relation is MatchRelation.ANCHORED_SUBSEQUENCE:
                    ok = _anchored_match(sigs, anchor, ctx, k)
                else:
                    ok = _suffix_match(sigs, anchor, ctx)
                if not ok:
                    continue
                matched_events = _rightmost_embedding(recent, sigs, ctx, k)
                args = None
                if pattern.mapping is not None:
                    first = recent.index(matched_events[0])
                    history = tuple(recent[first:])
                    result = evaluate(pattern.mapping,
                                      MatchedContext(tuple(matched_events), history))
                    args = result.args if result.complete else None
                candidates.append((pattern.p, pattern.pattern_id, pattern.target, args))
            candidates.sort(key=lambda c: (-c[0], c[1]))
            scored += 1
            if candidates and candidates[0][2] == event.tool_type:
                top1 += 1
            if event.tool_type in {c[2] for c in candidates[:3]}:
                top3 += 1
            actual_hash = canonical_arg_hash(event.args)
            if any(c[2] == event.tool_type and c[3] is not None
                   and canonical_arg_hash(c[3]) == actual_hash for c in candidates):
                hits += 1
    if scored == 0:
        return 0.0, 0.0, 0.0
    return top1 / scored, top3 / scored, hits / scored


def _rightmost_embedding(recent, sigs, ctx, k):
    anchor = len(sigs) - 1
    lo = max(0, anchor - k + 1)
    picked = [recent[anchor]]
    j = len(ctx) - 2
    pos = anchor - 1
    while j >= 0 and pos >= lo:
        if sigs[pos] == tuple(ctx[j]):
            picked.append(recent[pos])
            j -= 1
        pos -= 1
    picked.reverse()
    return picked
