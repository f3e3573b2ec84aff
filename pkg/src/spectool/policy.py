"""Speculation eligibility policy: per-tool permission, graded levels,
side-effect transformation, and arbitration of competing predictions.

Policies are operator-written YAML; the engine never infers side-effect
freedom on its own, and an empty or missing default denies everything.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable, Iterable, Mapping

import yaml

from .prediction import Completeness, PredictedInvocation


class SpecLevel(IntEnum):
    """Speculation depth, ordered by permissiveness."""

    WARM_ONLY = 1
    DRY_RUN = 2
    FULL = 3

    @property
    def label(self) -> str:
        return _LEVEL_LABELS[self]


_LEVEL_LABELS = {SpecLevel.WARM_ONLY: "warm_only", SpecLevel.DRY_RUN: "dry_run",
                 SpecLevel.FULL: "full"}
_LEVEL_BY_LABEL = {label: level for level, label in _LEVEL_LABELS.items()}


class DedupStrategy(IntEnum):
    MAX_EXPECTED_SPECULATIVE_UTILITY = 1


@dataclass(frozen=True)
class ToolRule:
    allow: bool
    max_speculation: SpecLevel = SpecLevel.FULL


@dataclass(frozen=True)
class SpeculationPolicy:
    default_allow: bool = False
    default_level: SpecLevel = SpecLevel.FULL
    tool_rules: Mapping[str, ToolRule] = field(default_factory=dict)
    dedup_strategy: DedupStrategy = DedupStrategy.MAX_EXPECTED_SPECULATIVE_UTILITY

    def rule_for(self, tool_type: str) -> ToolRule:
        rule = self.tool_rules.get(tool_type)
        if rule is not None:
            return rule
        return ToolRule(allow=self.default_allow, max_speculation=self.default_level)


DENY_ALL = SpeculationPolicy()


@dataclass(frozen=True)
class SpeculativeAction:
    prediction: PredictedInvocation
    level: SpecLevel
    expected_utility: float
    no_commit: bool = False

    @property
    def tool_type(self) -> str:
        return self.prediction.tool_type


class PolicyParseError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ParsedPolicy:
    policy: SpeculationPolicy
    warnings: list[str] = field(default_factory=list)


def _parse_level(value: Any, path: str) -> SpecLevel:
    if not isinstance(value, str) or value not in _LEVEL_BY_LABEL:
        raise PolicyParseError(path, f"invalid speculation level {value!r} "
                                     f"(expected one of {sorted(_LEVEL_BY_LABEL)})")
    return _LEVEL_BY_LABEL[value]


def _parse_bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise PolicyParseError(path, f"expected a boolean, got {value!r}")
    return value


def parse_policy(text: str) -> ParsedPolicy:
    """Parse a speculation policy document.

    An empty document means deny-all; a missing default section likewise
    defaults to deny. Unknown keys produce warnings, not errors, so policies
    remain forward-compatible.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise PolicyParseError("<document>", f"malformed YAML: {exc}") from exc
    warnings: list[str] = []
    if doc is None:
        return ParsedPolicy(policy=DENY_ALL, warnings=warnings)
    if not isinstance(doc, dict):
        raise PolicyParseError("<document>", "policy document must be a mapping")

    root = doc.get("speculation_policy", doc)
    if root is None:
        return ParsedPolicy(policy=DENY_ALL, warnings=warnings)
    if not isinstance(root, dict):
        raise PolicyParseError("speculation_policy", "must be a mapping")
    for key in doc:
        if key != "speculation_policy" and root is not doc:
            warnings.append(f"unknown top-level key: {key}")

    known = {"default", "tools", "deduplication"}
    for key in root:
        if key not in known:
            warnings.append(f"speculation_policy.{key}: unknown key")

    default_allow = False
    default_level = SpecLevel.FULL
    default = root.get("default")
    if default is not None:
        if not isinstance(default, dict):
            raise PolicyParseError("speculation_policy.default", "must be a mapping")
        if "allow" in default:
            default_allow = _parse_bool(default["allow"], "speculation_policy.default.allow")
        if "max_speculation" in default:
            default_level = _parse_level(default["max_speculation"],
                                         "speculation_policy.default.max_speculation")
        for key in default:
            if key not in {"allow", "max_speculation"}:
                warnings.append(f"speculation_policy.default.{key}: unknown key")

    tool_rules: dict[str, ToolRule] = {}
    tools = root.get("tools") or {}
    if not isinstance(tools, dict):
        raise PolicyParseError("speculation_policy.tools", "must be a mapping")
    for tool, spec in tools.items():
        path = f"speculation_policy.tools.{tool}"
        if spec is None:
            spec = {}
        if not isinstance(spec, dict):
            raise PolicyParseError(path, "must be a mapping")
        allow = _parse_bool(spec["allow"], f"{path}.allow") if "allow" in spec else False
        level = SpecLevel.FULL
        if "max_speculation" in spec:
            level = _parse_level(spec["max_speculation"], f"{path}.max_speculation")
        for key in spec:
            if key not in {"allow", "max_speculation"}:
                warnings.append(f"{path}.{key}: unknown key")
        tool_rules[str(tool)] = ToolRule(allow=allow, max_speculation=level)

    dedup = DedupStrategy.MAX_EXPECTED_SPECULATIVE_UTILITY
    dedup_section = root.get("deduplication")
    if dedup_section is not None:
        if not isinstance(dedup_section, dict):
            raise PolicyParseError("speculation_policy.deduplication", "must be a mapping")
        strategy = dedup_section.get("strategy", "max_expected_speculative_utility")
        if strategy != "max_expected_speculative_utility":
            raise PolicyParseError("speculation_policy.deduplication.strategy",
                                   f"unknown strategy {strategy!r}")
        for key in dedup_section:
            if key != "strategy":
                warnings.append(f"speculation_policy.deduplication.{key}: unknown key")

    policy = SpeculationPolicy(default_allow=default_allow, default_level=default_level,
                               tool_rules=tool_rules, dedup_strategy=dedup)
    return ParsedPolicy(policy=policy, warnings=warnings)


def policy_to_dict(policy: SpeculationPolicy) -> dict[str, Any]:
    """Effective policy with defaults materialized, for echo/inspection."""
    return {
        "speculation_policy": {
            "default": {
                "allow": policy.default_allow,
                "max_speculation": policy.default_level.label,
            },
            "tools": {
                tool: {"allow": rule.allow, "max_speculation": rule.max_speculation.label}
                for tool, rule in sorted(policy.tool_rules.items())
            },
            "deduplication": {"strategy": "max_expected_speculative_utility"},
        }
    }


# ---------------------------------------------------------------------------
# Admission
# ---------------------------------------------------------------------------

BenefitEstimator = Callable[[PredictedInvocation], float]


def admit(predictions: Iterable[PredictedInvocation], policy: SpeculationPolicy,
          benefit_of: BenefitEstimator) -> list[SpeculativeAction]:
    """Filter, grade, and deduplicate predictions into speculative actions.

    Disallowed tools are dropped; the speculation level is the lesser of the
    policy cap and what the prediction's completeness supports (incomplete
    predictions only warrant shallow preparatory work). Per target tool at
    most one action survives, chosen by expected speculative utility
    (probability times estimated latency reduction), ties broken by higher
    probability and then earlier creation.
    """
    best: dict[str, SpeculativeAction] = {}
    order: list[str] = []
    for prediction in predictions:
        rule = policy.rule_for(prediction.tool_type)
        if not rule.allow:
            continue
        implied = (SpecLevel.FULL if prediction.completeness is Completeness.FULL
                   else SpecLevel.WARM_ONLY)
        level = min(rule.max_speculation, implied)
        utility = prediction.probability * benefit_of(prediction)
        action = SpeculativeAction(prediction=prediction, level=level,
                                   expected_utility=utility)
        incumbent = best.get(prediction.tool_type)
        if incumbent is None:
            best[prediction.tool_type] = action
            order.append(prediction.tool_type)
        elif _beats(action, incumbent):
            best[prediction.tool_type] = action
    return [best[tool] for tool in order]


def _beats(challenger: SpeculativeAction, incumbent: SpeculativeAction) -> bool:
    a = (challenger.expected_utility, challenger.prediction.probability,
         -challenger.prediction.created_at)
    b = (incumbent.expected_utility, incumbent.prediction.probability,
         -incumbent.prediction.created_at)
    return a > b


def transform_side_effecting(action: SpeculativeAction,
                             dry_run_supported: bool = True) -> tuple[SpeculativeAction, bool]:
    """Rewrite a capped action into its safe, no-commit variant.

    Dry-run actions keep their level when the executor supports it and are
    downgraded to warm-only otherwise; the returned flag reports a downgrade.
    The no-commit marker is honored downstream: such results are never served
    to authoritative callers.
    """
    if action.level is SpecLevel.FULL:
        raise ValueError("full-level actions need no side-effect transformation")
    level = action.level
    downgraded = False
    if level is SpecLevel.DRY_RUN and not dry_run_supported:
        level = SpecLevel.WARM_ONLY
        downgraded = True
    return SpeculativeAction(prediction=action.prediction, level=level,
                             expected_utility=action.expected_utility,
                             no_commit=True), downgraded
