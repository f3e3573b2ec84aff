"""Symbolic argument-derivation programs, their inference, and lazy evaluation.

A mapping binds target-tool argument names to expressions over the payloads of
matched context events. Three expression classes are supported, searched in
order of increasing generality: fixed path lookup, index-with-fallback lookup
(the index advances with observed failures of the target tool), and one-hole
string templates with optional normalization.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, Sequence

from .events import Event, EventSignature, Status, values_equal

DEFAULT_VALIDATION_FRACTION = 0.9
DEFAULT_PATH_NODE_BUDGET = 10_000

PathStep = str | int
Path = tuple[PathStep, ...]


class MappingStructureError(ValueError):
    """A mapping references a context position that does not exist.

    This indicates a corrupted pattern rather than a payload that merely
    lacks the requested field.
    """


class Normalization(str, Enum):
    NONE = "none"
    TRIM = "trim"
    LOWERCASE = "lowercase"

    def apply(self, text: str) -> str:
        if self is Normalization.TRIM:
            return text.strip()
        if self is Normalization.LOWERCASE:
            return text.lower()
        return text


@dataclass(frozen=True)
class PathLookup:
    """Fixed field/path lookup in the result payload of one context event."""

    ctx_pos: int
    path: Path

    def __post_init__(self) -> None:
        if not self.path:
            raise ValueError("PathLookup path must be non-empty")


@dataclass(frozen=True)
class IndexedFallback:
    """Element-by-index lookup whose index advances with observed failures.

    The effective index is ``start_index`` plus the number of failed
    ``fail_tool`` invocations seen after the source context event, so a
    retry after one failure reads the next list element.
    """

    ctx_pos: int
    path_prefix: Path
    start_index: int
    path_suffix: Path
    fail_tool: str

    def __post_init__(self) -> None:
        if self.start_index < 0:
            raise ValueError("IndexedFallback start_index must be >= 0")


@dataclass(frozen=True)
class FormatTemplate:
    """One-hole string template: prefix + normalized(hole) + suffix."""

    prefix: str
    hole: PathLookup
    suffix: str
    normalization: Normalization = Normalization.NONE


MappingExpr = PathLookup | IndexedFallback | FormatTemplate


@dataclass(frozen=True)
class ArgBinding:
    arg_name: str
    expr: MappingExpr


@dataclass(frozen=True)
class ValueMapping:
    bindings: tuple[ArgBinding, ...]

    def arg_names(self) -> tuple[str, ...]:
        return tuple(b.arg_name for b in self.bindings)


class _Unbound:
    """Sentinel for a binding whose source path is absent at evaluation time."""

    def __repr__(self) -> str:  # pragma: no cover
        return "UNBOUND"


UNBOUND = _Unbound()


@dataclass(frozen=True)
class MatchedContext:
    """Concrete events matched by a pattern context.

    ``events`` aligns positionally with the context signatures. ``history``
    is the contiguous tool-event slice from the first matched event through
    the anchor, which fallback expressions scan for failures.
    """

    events: tuple[Event, ...]
    history: tuple[Event, ...] = ()

    def __post_init__(self) -> None:
        if not self.history:
            object.__setattr__(self, "history", self.events)


@dataclass(frozen=True)
class MappingResult:
    args: dict[str, Any]
    unbound: tuple[str, ...]

    @property
    def complete(self) -> bool:
        return not self.unbound


def _walk(payload: Any, path: Path) -> Any:
    node = payload
    for step in path:
        if isinstance(step, int):
            if not isinstance(node, list) or not 0 <= step < len(node):
                return UNBOUND
        else:
            if not isinstance(node, dict) or step not in node:
                return UNBOUND
        node = node[step]
    return node


def _as_context(matched: MatchedContext | Sequence[Event]) -> MatchedContext:
    if isinstance(matched, MatchedContext):
        return matched
    return MatchedContext(events=tuple(matched))


def _resolve(expr: MappingExpr, ctx: MatchedContext) -> Any:
    if isinstance(expr, PathLookup):
        if not 0 <= expr.ctx_pos < len(ctx.events):
            raise MappingStructureError(f"ctx_pos {expr.ctx_pos} out of range")
        return _walk(ctx.events[expr.ctx_pos].result, expr.path)
    if isinstance(expr, IndexedFallback):
        if not 0 <= expr.ctx_pos < len(ctx.events):
            raise MappingStructureError(f"ctx_pos {expr.ctx_pos} out of range")
        source = ctx.events[expr.ctx_pos]
        fails = _failures_after(ctx.history, source, expr.fail_tool)
        path = expr.path_prefix + (expr.start_index + fails,) + expr.path_suffix
        return _walk(source.result, path)
    if isinstance(expr, FormatTemplate):
        leaf = _resolve(expr.hole, ctx)
        if leaf is UNBOUND:
            return UNBOUND
        text = _leaf_str(leaf)
        if text is None:
            return UNBOUND
        return expr.prefix + expr.normalization.apply(text) + expr.suffix
    raise TypeError(f"unknown expression type: {type(expr)!r}")


def _failures_after(history: Sequence[Event], source: Event, fail_tool: str) -> int:
    count = 0
    seen_source = False
    for event in history:
        if event is source:
            seen_source = True
            continue
        if seen_source and event.tool_type == fail_tool and event.status is Status.FAIL:
            count += 1
    return count


def _leaf_str(leaf: Any) -> str | None:
    if isinstance(leaf, str):
        return leaf
    if isinstance(leaf, bool) or not isinstance(leaf, (int, float)):
        return None
    if isinstance(leaf, float) and leaf.is_integer():
        return str(int(leaf))
    return str(leaf)


def evaluate(mapping: ValueMapping, matched: MatchedContext | Sequence[Event]) -> MappingResult:
    """Evaluate every binding against the matched events.

    Bindings whose source path is absent come back unbound, yielding a
    partial prediction; a context position outside the match is a structural
    error and raises.
    """
    ctx = _as_context(matched)
    args: dict[str, Any] = {}
    unbound: list[str] = []
    for binding in mapping.bindings:
        value = _resolve(binding.expr, ctx)
        if value is UNBOUND:
            unbound.append(binding.arg_name)
        else:
            args[binding.arg_name] = value
    return MappingResult(args=args, unbound=tuple(unbound))


# ---------------------------------------------------------------------------
# Path enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathSearch:
    paths: tuple[Path, ...]
    truncated: bool


def candidate_paths(payload: Any, target_value: Any,
                    node_budget: int = DEFAULT_PATH_NODE_BUDGET) -> PathSearch:
    """Enumerate all paths whose leaf equals ``target_value``, depth-first.

    The walk is capped at ``node_budget`` visited nodes; hitting the cap
    flags the result as truncated so callers know the list may be partial.
    """
    paths: list[Path] = []
    visited = 0
    truncated = False

    def visit(node: Any, path: Path) -> None:
        nonlocal visited, truncated
        if truncated:
            return
        visited += 1
        if visited > node_budget:
            truncated = True
            return
        if isinstance(node, dict):
            for key in node:
                visit(node[key], path + (key,))
        elif isinstance(node, list):
            for idx, item in enumerate(node):
                visit(item, path + (idx,))
        elif values_equal(node, target_value):
            paths.append(path)

    visit(payload, ())
    return PathSearch(paths=tuple(paths), truncated=truncated)


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------

Occurrence = tuple[MatchedContext, Event]


def infer_mapping(occurrences: Sequence[Occurrence],
                  validation_fraction: float = DEFAULT_VALIDATION_FRACTION) -> ValueMapping | None:
    """Search the transformation classes for each target argument.

    Classes are tried in fixed order (path lookup, indexed fallback, format
    template) and the first expression reproducing the actual argument on at
    least ``validation_fraction`` of occurrences wins. Returns None when no
    argument admits any expression; a mapping covering only some arguments is
    a valid (partial) outcome.
    """
    if len(occurrences) < 2:
        return None
    arg_names = _common_scalar_args(occurrences)
    bindings: list[ArgBinding] = []
    for name in arg_names:
        expr = _infer_arg(name, occurrences, validation_fraction)
        if expr is not None:
            bindings.append(ArgBinding(name, expr))
    if not bindings:
        return None
    return ValueMapping(bindings=tuple(sorted(bindings, key=lambda b: b.arg_name)))


def _common_scalar_args(occurrences: Sequence[Occurrence]) -> list[str]:
    names: list[str] = []
    first = occurrences[0][1].args
    if not isinstance(first, dict):
        return names
    for name in sorted(first):
        ok = True
        for _, actual in occurrences:
            if not isinstance(actual.args, dict) or name not in actual.args:
                ok = False
                break
            if isinstance(actual.args[name], (dict, list)):
                ok = False
                break
        if ok:
            names.append(name)
    return names


def _infer_arg(name: str, occurrences: Sequence[Occurrence], fraction: float) -> MappingExpr | None:
    for searcher in (_search_path_lookup, _search_indexed_fallback, _search_format_template):
        expr = searcher(name, occurrences, fraction)
        if expr is not None:
            return expr
    return None


def _holds(expr: MappingExpr, name: str, occurrences: Sequence[Occurrence]) -> float:
    hits = 0
    for ctx, actual in occurrences:
        try:
            value = _resolve(expr, ctx)
        except MappingStructureError:
            return 0.0
        if value is not UNBOUND and values_equal(value, actual.args[name]):
            hits += 1
    return hits / len(occurrences)


def _source_positions(ctx: MatchedContext) -> Iterator[int]:
    # Failed events stay in the context for matching but their payloads are
    # never offered as derivation sources.
    for pos, event in enumerate(ctx.events):
        if event.status is Status.SUCCESS:
            yield pos


def _search_path_lookup(name: str, occurrences: Sequence[Occurrence],
                        fraction: float) -> PathLookup | None:
    ctx0, actual0 = occurrences[0]
    for pos in _source_positions(ctx0):
        search = candidate_paths(ctx0.events[pos].result, actual0.args[name])
        for path in search.paths:
            expr = PathLookup(ctx_pos=pos, path=path)
            if _holds(expr, name, occurrences) >= fraction:
                return expr
    return None


def _search_indexed_fallback(name: str, occurrences: Sequence[Occurrence],
                             fraction: float) -> IndexedFallback | None:
    target_tool = occurrences[0][1].tool_type
    # Seed hypotheses from the occurrence with the fewest observed failures so
    # start_index stays non-negative for every occurrence.
    fail_counts: list[list[int]] = []
    for ctx, _ in occurrences:
        counts = []
        for pos in range(len(ctx.events)):
            counts.append(_failures_after(ctx.history, ctx.events[pos], target_tool))
        fail_counts.append(counts)

    seed_idx = min(range(len(occurrences)),
                   key=lambda i: min(fail_counts[i]) if fail_counts[i] else 0)
    ctx_seed, actual_seed = occurrences[seed_idx]
    for pos in _source_positions(ctx_seed):
        n_fail = fail_counts[seed_idx][pos]
        search = candidate_paths(ctx_seed.events[pos].result, actual_seed.args[name])
        for path in search.paths:
            for cut, step in enumerate(path):
                if not isinstance(step, int):
                    continue
                start = step - n_fail
                if start < 0:
                    continue
                expr = IndexedFallback(ctx_pos=pos, path_prefix=path[:cut],
                                       start_index=start, path_suffix=path[cut + 1:],
                                       fail_tool=target_tool)
                if _holds(expr, name, occurrences) >= fraction:
                    return expr
    return None


def _search_format_template(name: str, occurrences: Sequence[Occurrence],
                            fraction: float) -> FormatTemplate | None:
    ctx0, actual0 = occurrences[0]
    actual_text = actual0.args[name]
    if not isinstance(actual_text, str):
        return None
    for pos in _source_positions(ctx0):
        for path, leaf in _scalar_leaves(ctx0.events[pos].result):
            text = _leaf_str(leaf)
            if text is None:
                continue
            for norm in (Normalization.NONE, Normalization.TRIM, Normalization.LOWERCASE):
                hole_text = norm.apply(text)
                if not hole_text:
                    continue
                start = actual_text.find(hole_text)
                while start != -1:
                    expr = FormatTemplate(
                        prefix=actual_text[:start],
                        hole=PathLookup(ctx_pos=pos, path=path),
                        suffix=actual_text[start + len(hole_text):],
                        normalization=norm,
                    )
                    if _holds(expr, name, occurrences) >= fraction:
                        return expr
                    start = actual_text.find(hole_text, start + 1)
    return None


def _scalar_leaves(payload: Any, path: Path = ()) -> Iterator[tuple[Path, Any]]:
    if isinstance(payload, dict):
        for key in payload:
            yield from _scalar_leaves(payload[key], path + (key,))
    elif isinstance(payload, list):
        for idx, item in enumerate(payload):
            yield from _scalar_leaves(item, path + (idx,))
    elif path:
        yield path, payload


# ---------------------------------------------------------------------------
# Serialization (compact JSON plus the human-readable path alias)
# ---------------------------------------------------------------------------

_ALIAS_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)Res\s*((?:\[[^\]]+\])+)\s*$")
_STEP_RE = re.compile(r"\[([^\]]+)\]")


def expr_to_json(expr: MappingExpr) -> dict[str, Any]:
    if isinstance(expr, PathLookup):
        return {"kind": "path", "ctx": expr.ctx_pos, "path": list(expr.path)}
    if isinstance(expr, IndexedFallback):
        return {
            "kind": "indexed_fallback",
            "ctx": expr.ctx_pos,
            "prefix": list(expr.path_prefix),
            "start": expr.start_index,
            "suffix": list(expr.path_suffix),
            "fail_tool": expr.fail_tool,
        }
    if isinstance(expr, FormatTemplate):
        return {
            "kind": "format",
            "prefix": expr.prefix,
            "hole": expr_to_json(expr.hole),
            "suffix": expr.suffix,
            "normalize": expr.normalization.value,
        }
    raise TypeError(f"unknown expression type: {type(expr)!r}")


def expr_from_json(obj: Any, context: Sequence[EventSignature] = ()) -> MappingExpr:
    if isinstance(obj, str):
        return parse_path_alias(obj, context)
    kind = obj.get("kind")
    if kind == "path":
        return PathLookup(ctx_pos=int(obj["ctx"]), path=_path_from_json(obj["path"]))
    if kind == "indexed_fallback":
        return IndexedFallback(
            ctx_pos=int(obj["ctx"]),
            path_prefix=_path_from_json(obj["prefix"]),
            start_index=int(obj["start"]),
            path_suffix=_path_from_json(obj["suffix"]),
            fail_tool=str(obj["fail_tool"]),
        )
    if kind == "format":
        hole = expr_from_json(obj["hole"], context)
        if not isinstance(hole, PathLookup):
            raise ValueError("format template hole must be a path lookup")
        return FormatTemplate(
            prefix=str(obj.get("prefix", "")),
            hole=hole,
            suffix=str(obj.get("suffix", "")),
            normalization=Normalization(obj.get("normalize", "none")),
        )
    raise ValueError(f"unknown mapping expression kind: {kind!r}")


def _path_from_json(steps: Sequence[Any]) -> Path:
    return tuple(int(s) if isinstance(s, (int, float)) and not isinstance(s, bool) else str(s)
                 for s in steps)


def parse_path_alias(text: str, context: Sequence[EventSignature]) -> PathLookup:
    """Parse the ``<Tool>Res["key"][0]...`` notation used in pattern files.

    The tool name resolves (case-insensitively) to the last matching context
    position, preferring successful events.
    """
    match = _ALIAS_RE.match(text)
    if match is None:
        raise ValueError(f"unrecognized mapping alias: {text!r}")
    tool, steps_text = match.groups()
    positions = [i for i, sig in enumerate(context) if sig.tool_type.lower() == tool.lower()]
    if not positions:
        raise ValueError(f"alias tool {tool!r} not found in pattern context")
    success = [i for i in positions if context[i].status is Status.SUCCESS]
    ctx_pos = (success or positions)[-1]
    path: list[PathStep] = []
    for step in _STEP_RE.findall(steps_text):
        step = step.strip()
        if (step.startswith('"') and step.endswith('"')) or (step.startswith("'") and step.endswith("'")):
            path.append(step[1:-1])
        else:
            path.append(int(step))
    return PathLookup(ctx_pos=ctx_pos, path=tuple(path))


def mapping_to_json(mapping: ValueMapping) -> list[dict[str, Any]]:
    return [{"arg": b.arg_name, "expr": expr_to_json(b.expr)} for b in mapping.bindings]


def mapping_from_json(obj: Any, context: Sequence[EventSignature] = ()) -> ValueMapping:
    bindings = tuple(
        ArgBinding(str(item["arg"]), expr_from_json(item["expr"], context))
        for item in obj
    )
    return ValueMapping(bindings=tuple(sorted(bindings, key=lambda b: b.arg_name)))
