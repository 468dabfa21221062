"""Decision objects: the structured candidate actions the gate evaluates.

A decision names a proposed operation, its target, scope, timing, and a
bag of contextual facts. It also carries named baseline features for the
compensatory scorer and free-form provenance metadata. Parsing is total:
every byte sequence yields either a validated ``DecisionObject`` or
exactly one typed :class:`~rta.errors.DecisionParseError`.

The gate evaluates exactly what it is given; nothing here fetches or
enriches context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict

from .canonical import canonical_bytes, sha256_hex
from .errors import DecisionParseError

REQUIRED_FIELDS = ("decision_class", "operation", "target", "scope", "timing")
OPTIONAL_FIELDS = ("context", "features", "metadata")
ALL_FIELDS = REQUIRED_FIELDS + OPTIONAL_FIELDS

# Fields constraint expressions may reference. metadata is provenance
# only and features belong to the scoring baseline, so neither is
# addressable from a constraint.
CONSTRAINT_VISIBLE_FIELDS = ("decision_class", "operation", "target", "scope", "timing")


def parse_rfc3339(text: str) -> datetime:
    """Parse an RFC-3339 timestamp; the UTC offset is mandatory.

    Raises ValueError on anything else, including naive timestamps.
    """
    if not isinstance(text, str) or "T" not in text and "t" not in text:
        raise ValueError(f"not an RFC-3339 timestamp: {text!r}")
    normalized = text.replace("t", "T", 1)
    if normalized.endswith(("Z", "z")):
        normalized = normalized[:-1] + "+00:00"
    parsed = datetime.fromisoformat(normalized)
    if parsed.tzinfo is None:
        raise ValueError(f"timestamp lacks a UTC offset: {text!r}")
    return parsed


def format_clock(moment: datetime) -> str:
    """Render a tz-aware datetime as an RFC-3339 UTC string."""
    if moment.tzinfo is None:
        raise ValueError("clock must be timezone-aware")
    return moment.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


@dataclass(frozen=True)
class DecisionObject:
    """A validated candidate action. Immutable after construction."""

    decision_class: str
    operation: str
    target: str
    scope: str
    timing: str
    context: Dict[str, Any] = field(default_factory=dict)
    features: Dict[str, float] = field(default_factory=dict)
    metadata: Dict[str, str] = field(default_factory=dict)

    def to_value_tree(self) -> Dict[str, Any]:
        """Plain JSON-compatible dict covering every field."""
        return {
            "decision_class": self.decision_class,
            "operation": self.operation,
            "target": self.target,
            "scope": self.scope,
            "timing": self.timing,
            "context": self.context,
            "features": self.features,
            "metadata": self.metadata,
        }


def _require_string(tree: Dict[str, Any], name: str, non_empty: bool) -> str:
    value = tree[name]
    if not isinstance(value, str):
        raise DecisionParseError("BAD_TYPE", f"field {name!r} must be a string", field=name)
    if non_empty and not value:
        raise DecisionParseError("BAD_TYPE", f"field {name!r} must be non-empty", field=name)
    return value


def _check_context_tree(value: Any, where: str) -> None:
    # json.loads was deliberately lenient so feature NaNs get a named
    # error; strict JSON has no NaN/Infinity, so anywhere else they are
    # a malformed document.
    if isinstance(value, bool) or value is None or isinstance(value, (str, int)):
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise DecisionParseError(
                "MALFORMED_JSON", f"non-finite number at {where}", path=where
            )
        return
    if isinstance(value, dict):
        for k, v in value.items():
            if not isinstance(k, str):
                raise DecisionParseError("MALFORMED_JSON", f"non-string key at {where}")
            _check_context_tree(v, f"{where}.{k}")
        return
    if isinstance(value, list):
        for i, v in enumerate(value):
            _check_context_tree(v, f"{where}[{i}]")
        return
    raise DecisionParseError("BAD_TYPE", f"unsupported value type at {where}", path=where)


def decision_from_value(tree: Any) -> DecisionObject:
    """Validate a parsed JSON value tree into a DecisionObject."""
    if not isinstance(tree, dict):
        raise DecisionParseError("MALFORMED_JSON", "decision document must be a JSON object")
    for key in tree:
        if key not in ALL_FIELDS:
            raise DecisionParseError("UNKNOWN_FIELD", f"unknown top-level key {key!r}", field=key)
    for name in REQUIRED_FIELDS:
        if name not in tree:
            raise DecisionParseError("MISSING_FIELD", f"missing required field {name!r}", field=name)

    decision_class = _require_string(tree, "decision_class", non_empty=True)
    operation = _require_string(tree, "operation", non_empty=True)
    target = _require_string(tree, "target", non_empty=True)
    scope = _require_string(tree, "scope", non_empty=False)
    timing = _require_string(tree, "timing", non_empty=True)
    try:
        parse_rfc3339(timing)
    except ValueError as exc:
        raise DecisionParseError("BAD_TIMESTAMP", str(exc), field="timing") from None

    context = tree.get("context", {})
    if not isinstance(context, dict):
        raise DecisionParseError("BAD_TYPE", "field 'context' must be an object", field="context")
    _check_context_tree(context, "context")

    raw_features = tree.get("features", {})
    if not isinstance(raw_features, dict):
        raise DecisionParseError("BAD_TYPE", "field 'features' must be an object", field="features")
    features: Dict[str, float] = {}
    for name, value in raw_features.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise DecisionParseError(
                "BAD_TYPE", f"feature {name!r} must be a number", field=name
            )
        if not math.isfinite(float(value)):
            raise DecisionParseError(
                "NON_FINITE_FEATURE", f"feature {name!r} is not finite", field=name
            )
        features[name] = float(value)

    metadata = tree.get("metadata", {})
    if not isinstance(metadata, dict):
        raise DecisionParseError("BAD_TYPE", "field 'metadata' must be an object", field="metadata")
    for name, value in metadata.items():
        if not isinstance(value, str):
            raise DecisionParseError(
                "BAD_TYPE", f"metadata {name!r} must be a string", field=name
            )

    return DecisionObject(
        decision_class=decision_class,
        operation=operation,
        target=target,
        scope=scope,
        timing=timing,
        context=context,
        features=features,
        metadata=dict(metadata),
    )


def parse_decision(data: bytes | str) -> DecisionObject:
    """Parse and validate one UTF-8 JSON decision document."""
    import json

    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecisionParseError("MALFORMED_JSON", f"not UTF-8: {exc}") from None
    try:
        tree = json.loads(data)
    except json.JSONDecodeError as exc:
        raise DecisionParseError("MALFORMED_JSON", f"invalid JSON: {exc}") from None
    return decision_from_value(tree)


def canonicalize(decision: DecisionObject) -> bytes:
    """Canonical serialization (see :mod:`rta.canonical` for the rules)."""
    return canonical_bytes(decision.to_value_tree())


def decision_hash(decision: DecisionObject) -> str:
    """SHA-256 over the canonical form, hex-encoded; stable across runs."""
    return sha256_hex(canonicalize(decision))
