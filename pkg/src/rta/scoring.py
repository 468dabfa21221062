"""Compensatory scoring baseline: S = sum of w_i * x_i, allow iff S >= theta.

This is the comparison system, not the gate. Its defining property is
that strong features offset weak ones; the divergence analyzer exploits
exactly that to show where it and the constraint gate must disagree.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Tuple

from .decision import DecisionObject
from .errors import ScoringError


@dataclass(frozen=True)
class ScoringModel:
    """Weights, threshold, and the feature order the sum is taken in."""

    feature_names: Tuple[str, ...]
    weights: Tuple[float, ...]
    theta: float
    clamp: bool = True

    def __post_init__(self):
        if len(self.feature_names) != len(self.weights):
            raise ScoringError(
                "BAD_MODEL",
                f"{len(self.feature_names)} feature names vs {len(self.weights)} weights",
            )
        if not self.feature_names:
            raise ScoringError("BAD_MODEL", "a scoring model needs at least one feature")
        seen = set()
        for name in self.feature_names:
            if not isinstance(name, str) or not name:
                raise ScoringError("BAD_MODEL", "feature names must be non-empty strings")
            if name in seen:
                raise ScoringError("BAD_MODEL", f"duplicate feature name {name!r}")
            seen.add(name)
        for name, weight in zip(self.feature_names, self.weights):
            if isinstance(weight, bool) or not isinstance(weight, (int, float)):
                raise ScoringError("BAD_MODEL", f"weight for {name!r} must be a number")
            if not math.isfinite(weight):
                raise ScoringError("BAD_MODEL", f"weight for {name!r} must be finite")
            if weight < 0:
                raise ScoringError(
                    "NEGATIVE_WEIGHT", f"weight for {name!r} is {weight}; weights are w_i >= 0"
                )
        if isinstance(self.theta, bool) or not isinstance(self.theta, (int, float)):
            raise ScoringError("BAD_MODEL", "theta must be a number")
        if not math.isfinite(self.theta):
            raise ScoringError("BAD_MODEL", "theta must be finite")
        if not isinstance(self.clamp, bool):
            raise ScoringError("BAD_MODEL", "clamp must be a boolean")

    def to_value_tree(self) -> Dict[str, Any]:
        return {
            "feature_names": list(self.feature_names),
            "weights": [float(w) for w in self.weights],
            "theta": float(self.theta),
            "clamp": self.clamp,
        }


@dataclass(frozen=True)
class ScoreReport:
    """One scored decision: the sum, the threshold, and each term."""

    score: float
    threshold: float
    allowed: bool
    contributions: Tuple[Tuple[str, float], ...]

    def to_value_tree(self) -> Dict[str, Any]:
        return {
            "score": self.score,
            "threshold": self.threshold,
            "allowed": self.allowed,
            "contributions": [[name, value] for name, value in self.contributions],
        }


def _clamp_unit(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def score_features(model: ScoringModel, features: Mapping[str, float]) -> ScoreReport:
    """Score a bare feature mapping.

    Summation is sequential in feature_names order, so identical inputs
    reproduce the identical float. Ties (S == theta) allow.
    """
    contributions = []
    total = 0.0
    for name, weight in zip(model.feature_names, model.weights):
        if name not in features:
            raise ScoringError(
                "MISSING_FEATURE",
                f"feature {name!r} is absent from the decision; the corpus must be "
                "explicit, a missing feature is not zero",
                feature=name,
            )
        x = float(features[name])
        if model.clamp:
            x = _clamp_unit(x)
        term = weight * x
        contributions.append((name, term))
        total += term
    return ScoreReport(
        score=total,
        threshold=float(model.theta),
        allowed=total >= model.theta,
        contributions=tuple(contributions),
    )


def score(model: ScoringModel, decision: DecisionObject) -> ScoreReport:
    """Score a decision from its named features."""
    return score_features(model, decision.features)


def model_from_value(tree: Any) -> ScoringModel:
    """Build a model from parsed JSON, rejecting unknown keys."""
    if not isinstance(tree, dict):
        raise ScoringError("BAD_MODEL", "model document must be a JSON object")
    known = {"feature_names", "weights", "theta", "clamp"}
    unknown = sorted(set(tree) - known)
    if unknown:
        raise ScoringError("BAD_MODEL", f"unknown model keys: {', '.join(unknown)}")
    for key in ("feature_names", "weights", "theta"):
        if key not in tree:
            raise ScoringError("BAD_MODEL", f"model lacks {key!r}")
    names = tree["feature_names"]
    weights = tree["weights"]
    if not isinstance(names, list) or not isinstance(weights, list):
        raise ScoringError("BAD_MODEL", "feature_names and weights must be arrays")
    return ScoringModel(
        feature_names=tuple(names),
        weights=tuple(weights),
        theta=tree["theta"],
        clamp=tree.get("clamp", True),
    )


def parse_model(data: bytes | str) -> ScoringModel:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        tree = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ScoringError("BAD_MODEL", f"invalid JSON: {exc}") from None
    return model_from_value(tree)


def load_model_file(path) -> ScoringModel:
    from pathlib import Path as _P

    return parse_model(_P(path).read_bytes())
