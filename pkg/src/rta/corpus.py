"""Case corpus: decision files with expected outcomes, run as a table.

A corpus directory holds one JSON file per case plus an optional
README. Each case pins the decision, the expected gate outcome, and
optionally the expected baseline verdict, so corpus runs double as
regression tests and as the divergence demonstration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .decision import DecisionObject, decision_from_value
from .dsl import ConstraintSet
from .errors import ConfigError, RtaError
from .evaluator import GateReport, OutcomeKind, evaluate
from .scoring import ScoreReport, ScoringModel, score

_CASE_KEYS = {"id", "decision", "expected_gate", "expected_baseline", "notes"}
_KINDS = tuple(kind.value for kind in OutcomeKind)


@dataclass(frozen=True)
class CorpusCase:
    id: str
    decision: DecisionObject
    expected_gate: str
    expected_baseline: Optional[bool] = None  # expected "allowed", when stated
    notes: str = ""


def case_from_value(tree: Any, origin: str = "") -> CorpusCase:
    where = f" in {origin}" if origin else ""
    if not isinstance(tree, dict):
        raise ConfigError(f"corpus case{where} must be a JSON object")
    unknown = sorted(set(tree) - _CASE_KEYS)
    if unknown:
        raise ConfigError(f"corpus case{where} has unknown keys: {', '.join(unknown)}")
    for key in ("id", "decision", "expected_gate"):
        if key not in tree:
            raise ConfigError(f"corpus case{where} lacks {key!r}")
    case_id = tree["id"]
    if not isinstance(case_id, str) or not case_id:
        raise ConfigError(f"corpus case{where}: id must be a non-empty string")
    expected = tree["expected_gate"]
    if expected not in _KINDS:
        raise ConfigError(
            f"case {case_id!r}: expected_gate {expected!r} is not one of {', '.join(_KINDS)}"
        )
    baseline = tree.get("expected_baseline")
    expected_allowed: Optional[bool] = None
    if baseline is not None:
        if not isinstance(baseline, dict) or set(baseline) != {"allowed"} \
                or not isinstance(baseline["allowed"], bool):
            raise ConfigError(
                f"case {case_id!r}: expected_baseline must be {{\"allowed\": true|false}}"
            )
        expected_allowed = baseline["allowed"]
    notes = tree.get("notes", "")
    if not isinstance(notes, str):
        raise ConfigError(f"case {case_id!r}: notes must be a string")
    try:
        decision = decision_from_value(tree["decision"])
    except RtaError as exc:
        raise ConfigError(f"case {case_id!r}: bad decision: {exc}") from None
    return CorpusCase(
        id=case_id,
        decision=decision,
        expected_gate=expected,
        expected_baseline=expected_allowed,
        notes=notes,
    )


def load_case_file(path) -> CorpusCase:
    path = Path(path)
    try:
        tree = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read corpus case {path}: {exc}") from None
    return case_from_value(tree, origin=str(path))


def load_corpus_dir(path) -> Tuple[CorpusCase, ...]:
    """Load every *.json case in a directory, sorted by case id."""
    root = Path(path)
    if not root.is_dir():
        raise ConfigError(f"not a corpus directory: {root}")
    cases: List[CorpusCase] = []
    for file in sorted(root.iterdir()):
        if file.suffix.lower() != ".json" or not file.is_file():
            continue
        cases.append(load_case_file(file))
    ids = [case.id for case in cases]
    for i, case_id in enumerate(ids):
        if case_id in ids[:i]:
            raise ConfigError(f"duplicate case id {case_id!r} in corpus {root}")
    if not cases:
        raise ConfigError(f"corpus directory {root} holds no case files")
    return tuple(sorted(cases, key=lambda c: c.id))


@dataclass(frozen=True)
class CaseResult:
    """Actual vs expected for one case; ok means every expectation held."""

    case: CorpusCase
    gate: GateReport
    baseline: Optional[ScoreReport]
    divergent: bool  # baseline allowed while the gate rejected

    @property
    def gate_ok(self) -> bool:
        return self.gate.outcome.kind.value == self.case.expected_gate

    @property
    def baseline_ok(self) -> bool:
        if self.case.expected_baseline is None or self.baseline is None:
            return True
        return self.baseline.allowed == self.case.expected_baseline

    @property
    def ok(self) -> bool:
        return self.gate_ok and self.baseline_ok


def run_corpus(
    cases: Sequence[CorpusCase],
    constraint_sets: Dict[str, ConstraintSet],
    model: Optional[ScoringModel],
    clock: str,
) -> Tuple[CaseResult, ...]:
    """Evaluate every case against its class's constraint set (and the
    baseline model when given), under one pinned evaluation clock.
    """
    results: List[CaseResult] = []
    for case in cases:
        cls = case.decision.decision_class
        if cls not in constraint_sets:
            raise ConfigError(
                f"case {case.id!r}: no constraint set loaded for class {cls!r}"
            )
        try:
            gate = evaluate(constraint_sets[cls], case.decision, clock)
        except RtaError as exc:
            raise type(exc)(f"case {case.id!r}: {Exception.__str__(exc)}") from None
        baseline = None
        if model is not None:
            try:
                baseline = score(model, case.decision)
            except RtaError as exc:
                raise type(exc)(exc.code, f"case {case.id!r}: {Exception.__str__(exc)}") from None
        divergent = bool(
            baseline is not None
            and baseline.allowed
            and gate.outcome.kind is not OutcomeKind.ALLOW
        )
        results.append(CaseResult(case=case, gate=gate, baseline=baseline, divergent=divergent))
    return tuple(results)
