"""Gate evaluation: non-compensatory conjunction over a constraint set.

A decision is allowed iff every constraint in its class's set passes.
Any failure yields a non-action outcome (DEFER, REQUEST_INFO, or
ESCALATE), chosen by maximum severity over the failing constraints'
``on_fail`` hints. There is no score and no trade-off: one failing
constraint rejects, no matter how well the rest look.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .decision import DecisionObject, decision_from_value, decision_hash, parse_rfc3339
from .dsl import (
    ConstraintDef,
    ConstraintSet,
    ConstraintVerdict,
    _apply_assignment,
    eval_constraint,
    find_assignment,
)
from .errors import ClassMismatchError, NotRejectedError


class OutcomeKind(str, enum.Enum):
    ALLOW = "ALLOW"
    DEFER = "DEFER"
    REQUEST_INFO = "REQUEST_INFO"
    ESCALATE = "ESCALATE"


# Routing severity for on_fail hints; higher wins.
_SEVERITY = {"defer": 0, "request_info": 1, "escalate": 2}
_HINT_KIND = {
    "defer": OutcomeKind.DEFER,
    "request_info": OutcomeKind.REQUEST_INFO,
    "escalate": OutcomeKind.ESCALATE,
}


@dataclass(frozen=True)
class Outcome:
    """What the gate decided and why.

    kind == ALLOW exactly when failed_constraints is empty; a non-ALLOW
    kind is the max-severity routing of the failing constraints' hints.
    """

    kind: OutcomeKind
    failed_constraints: Tuple[str, ...]
    reasons: Tuple[str, ...]

    def to_value_tree(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "failed_constraints": list(self.failed_constraints),
            "reasons": list(self.reasons),
        }


@dataclass(frozen=True)
class GateReport:
    """Audit-grade record of one evaluation: every verdict, not just the
    first failure, plus the inputs needed to reproduce it exactly.
    """

    decision_class: str
    decision_hash: str
    evaluation_clock: str
    verdicts: Tuple[ConstraintVerdict, ...]
    outcome: Outcome

    def to_value_tree(self) -> Dict[str, Any]:
        return {
            "decision_class": self.decision_class,
            "decision_hash": self.decision_hash,
            "evaluation_clock": self.evaluation_clock,
            "verdicts": [v.to_value_tree() for v in self.verdicts],
            "outcome": self.outcome.to_value_tree(),
        }


def route_non_action(hints: Sequence[str]) -> OutcomeKind:
    """Pick the non-action outcome: max severity, escalate > request_info > defer."""
    if not hints:
        raise ValueError("route_non_action needs at least one on_fail hint")
    worst = max(hints, key=lambda hint: _SEVERITY[hint])
    return _HINT_KIND[worst]


def evaluate(constraint_set: ConstraintSet, decision: DecisionObject, clock: str) -> GateReport:
    """Evaluate every constraint (no short-circuit) and decide.

    Deterministic in (constraint set, canonical decision, clock). The
    decision's class must match the set's; anything else is a caller
    wiring bug, reported loudly rather than folded into a non-action.
    """
    if decision.decision_class != constraint_set.decision_class:
        raise ClassMismatchError(
            f"decision class {decision.decision_class!r} does not match "
            f"constraint set {constraint_set.decision_class!r}"
        )
    parse_rfc3339(clock)  # reject a bad clock before any verdict exists
    verdicts = tuple(
        eval_constraint(c, decision, clock) for c in constraint_set.constraints
    )
    failing = [(c, v) for c, v in zip(constraint_set.constraints, verdicts) if not v.passed]
    if not failing:
        outcome = Outcome(OutcomeKind.ALLOW, (), ())
    else:
        kind = route_non_action([c.on_fail for c, _ in failing])
        outcome = Outcome(
            kind,
            tuple(c.id for c, _ in failing),
            tuple(f"{c.id}: {v.reason}" for c, v in failing),
        )
    return GateReport(
        decision_class=decision.decision_class,
        decision_hash=decision_hash(decision),
        evaluation_clock=clock,
        verdicts=verdicts,
        outcome=outcome,
    )


def unknown_class_outcome(decision_class: str) -> Outcome:
    """Fail-closed outcome for a decision class with no constraint set.

    Used by the gateway's default unknown-class policy (and by audit
    replay to re-derive such records). Unlike evaluator outcomes it has
    no failing constraints to name: there was no set to evaluate, which
    is exactly why it escalates.
    """
    return Outcome(
        kind=OutcomeKind.ESCALATE,
        failed_constraints=(),
        reasons=(f"UNKNOWN_CLASS: no constraint set loaded for class {decision_class!r}",),
    )


def check_monotonic_rejection(
    constraint_set: ConstraintSet,
    decision: DecisionObject,
    clock: str,
    max_subsets: int = 4096,
    seed: int = 0,
) -> bool:
    """Probe that a rejection cannot be flipped to ALLOW while its
    failing constraints keep failing.

    Takes a rejected decision, then derives variants realizing every
    combination of pass/fail verdicts over the non-failing constraints
    (exhaustive up to ``max_subsets`` combinations, sampled beyond) by
    editing only fields those constraints reference. Variants where an
    edit accidentally repairs one of the original failures leave the
    premise and are skipped. Returns True iff no derived variant is
    allowed. A False return is a broken conjunction, not a property of
    the inputs.
    """
    base = evaluate(constraint_set, decision, clock)
    if base.outcome.kind is OutcomeKind.ALLOW:
        raise NotRejectedError(
            "monotonic-rejection check needs a rejected decision; this one is allowed"
        )
    failed_ids = set(base.outcome.failed_constraints)
    others: List[ConstraintDef] = [
        c for c in constraint_set.constraints if c.id not in failed_ids
    ]
    template = decision.to_value_tree()

    # One fail-forcing assignment per non-failing constraint, found once.
    # A constraint with no such assignment (e.g. expr "true") simply cannot
    # flip; combinations demanding it are unrealizable and skipped.
    fail_edits: Dict[str, Optional[Dict[Any, Any]]] = {
        c.id: find_assignment(c, template, clock, want_pass=False) for c in others
    }

    count = len(others)
    total = 1 << count
    if total <= max_subsets:
        masks: Sequence[int] = range(total)
    else:
        masks = random.Random(seed).sample(range(total), max_subsets)

    for mask in masks:
        merged: Dict[Any, Any] = {}
        realizable = True
        for bit, constraint in enumerate(others):
            if mask & (1 << bit):  # this constraint is targeted to fail
                edit = fail_edits[constraint.id]
                if edit is None:
                    realizable = False
                    break
                merged.update(edit)
        if not realizable:
            continue
        try:
            variant = decision_from_value(_apply_assignment(template, merged))
        except Exception:
            continue
        report = evaluate(constraint_set, variant, clock)
        still_failing = failed_ids <= set(report.outcome.failed_constraints)
        if not still_failing:
            continue  # an edit repaired an original failure; premise gone
        if report.outcome.kind is OutcomeKind.ALLOW:
            return False
    return True
