"""Divergence analysis: where the scorer and the gate must disagree.

The compensatory baseline trades features off against each other, so a
decision can fail one required check while high scores elsewhere carry
it over the threshold. This module makes that gap concrete three ways:

* ``find_witness`` constructs a single decision the baseline allows and
  the gate rejects (or reports the construction infeasible);
* ``sweep_weights`` enumerates a whole weight grid and checks that an
  arithmetic feasibility predicate exactly predicts where witnesses
  exist, so the non-equivalence is not an artifact of one lucky model;
* ``compare_on_corpus`` joins both systems over authored cases.

Witness feasibility is bounded by weight mass: with inputs clamped to
[0,1], a witness that zeroes feature k can score at most the sum of the
other weights (coupled mode), or the full weight sum when the failed
constraint's own feature stays high (decoupled mode). The predicate is
that sum compared against theta.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

from .corpus import CorpusCase
from .decision import DecisionObject, decision_from_value
from .dsl import (
    ConstraintDef,
    ConstraintSet,
    _apply_assignment,
    build_constraint_set,
    eval_constraint,
    find_assignment,
    parse_expr,
)
from .errors import (
    ClassMismatchError,
    ConfigError,
    GridTooLargeError,
    ScoringError,
    UnfalsifiableConstraintError,
)
from .evaluator import Outcome, OutcomeKind, evaluate
from .scoring import ScoreReport, ScoringModel, score, score_features

# Pinned default so analyses are reproducible without a caller-chosen clock.
DEFAULT_CLOCK = "2026-01-01T00:00:00Z"

COUPLING_MODES = ("coupled", "decoupled")


@dataclass(frozen=True)
class WitnessSpec:
    """Which feature index to fail, under which model and coupling.

    coupling_map pairs feature names with constraint ids; None pairs
    them positionally (feature i with the i-th constraint in set order).
    coupled mode zeroes the failed constraint's own feature (the harder,
    conservative case); decoupled leaves it high.
    """

    model: ScoringModel
    failed_index: int
    coupling: str = "coupled"
    coupling_map: Optional[Mapping[str, str]] = None


@dataclass(frozen=True)
class DivergenceRecord:
    """One decision the baseline allows and the gate rejects."""

    decision: DecisionObject
    gate_outcome: Outcome
    baseline: ScoreReport

    def to_value_tree(self) -> Dict[str, Any]:
        return {
            "decision": self.decision.to_value_tree(),
            "gate_outcome": self.gate_outcome.to_value_tree(),
            "baseline": self.baseline.to_value_tree(),
        }


def _pairing(
    model: ScoringModel,
    constraint_set: ConstraintSet,
    coupling_map: Optional[Mapping[str, str]],
) -> Dict[str, str]:
    """Validated total 1:1 map from feature name to constraint id."""
    ids = constraint_set.ids()
    if coupling_map is None:
        if len(model.feature_names) != len(ids):
            raise ConfigError(
                f"{len(model.feature_names)} features cannot pair positionally with "
                f"{len(ids)} constraints; give an explicit coupling map"
            )
        return dict(zip(model.feature_names, ids))
    mapping = dict(coupling_map)
    if set(mapping) != set(model.feature_names):
        raise ConfigError("coupling map must cover every feature name exactly")
    if sorted(mapping.values()) != sorted(set(mapping.values())):
        raise ConfigError("coupling map must pair each feature with a distinct constraint")
    unknown = sorted(set(mapping.values()) - set(ids))
    if unknown:
        raise ConfigError(f"coupling map names unknown constraints: {', '.join(unknown)}")
    return mapping


def mode_features(
    feature_names: Sequence[str], failed_index: int, coupling: str
) -> Dict[str, float]:
    """The witness feature vector: all ones, except x_k under coupled mode."""
    features = {name: 1.0 for name in feature_names}
    if coupling == "coupled":
        features[feature_names[failed_index]] = 0.0
    return features


def predict_feasible(model: ScoringModel, failed_index: int, coupling: str) -> bool:
    """Feasibility predicate: achievable weight mass reaches theta.

    coupled: sum of w_i over i != k >= theta; decoupled: sum of all w_i
    >= theta. Summed in weight order, matching the scorer's arithmetic.
    """
    total = 0.0
    for i, weight in enumerate(model.weights):
        if coupling == "coupled" and i == failed_index:
            continue
        total += weight
    return total >= model.theta


def _constraint_by_id(constraint_set: ConstraintSet, cid: str) -> ConstraintDef:
    for constraint in constraint_set.constraints:
        if constraint.id == cid:
            return constraint
    raise ConfigError(f"no constraint {cid!r} in class {constraint_set.decision_class!r}")


def _construct_witness_decision(
    constraint_set: ConstraintSet,
    failed_id: str,
    features: Mapping[str, float],
    clock: str,
) -> DecisionObject:
    """Synthesize a decision failing exactly the designated constraint.

    Minimal construction: fields referenced by other constraints get
    satisfying values, the designated constraint's fields get violating
    values (applied last, so they win any overlap), features are set by
    the caller. An unsatisfiable *other* constraint is left failing;
    that only makes the gate reject harder.
    """
    tree: Dict[str, Any] = {
        "decision_class": constraint_set.decision_class,
        "operation": "synthesized_action",
        "target": "synthesized_target",
        "scope": "synthesized_scope",
        "timing": clock,
        "context": {},
        "features": dict(features),
    }
    for constraint in constraint_set.constraints:
        if constraint.id == failed_id:
            continue
        edit = find_assignment(constraint, tree, clock, want_pass=True)
        if edit:
            tree = _apply_assignment(tree, edit)
    designated = _constraint_by_id(constraint_set, failed_id)
    edit = find_assignment(designated, tree, clock, want_pass=False)
    if edit is None:
        raise UnfalsifiableConstraintError(failed_id)
    tree = _apply_assignment(tree, edit)
    decision = decision_from_value(tree)
    if eval_constraint(designated, decision, clock).passed:
        raise UnfalsifiableConstraintError(
            failed_id,
            f"constraint {failed_id!r} still passes after applying a violating assignment",
        )
    return decision


def find_witness(
    spec: WitnessSpec,
    constraint_set: ConstraintSet,
    clock: str = DEFAULT_CLOCK,
) -> Optional[DivergenceRecord]:
    """Construct a divergence witness, or return None when infeasible.

    None means the construction cannot clear theta (insufficient weight
    mass), not an error: it documents the boundary of the divergence
    argument for this model.
    """
    if spec.coupling not in COUPLING_MODES:
        raise ConfigError(f"coupling must be one of {COUPLING_MODES}")
    names = spec.model.feature_names
    if not 0 <= spec.failed_index < len(names):
        raise ConfigError(f"failed_index {spec.failed_index} out of range for {len(names)} features")
    pairs = _pairing(spec.model, constraint_set, spec.coupling_map)
    failed_id = pairs[names[spec.failed_index]]
    features = mode_features(names, spec.failed_index, spec.coupling)
    decision = _construct_witness_decision(constraint_set, failed_id, features, clock)
    baseline = score(spec.model, decision)
    if not baseline.allowed:
        return None
    gate = evaluate(constraint_set, decision, clock)
    # Soundness re-check on emission: a record must show real divergence.
    if gate.outcome.kind is OutcomeKind.ALLOW:
        raise AssertionError(
            "internal error: constructed witness was allowed by the gate"
        )
    return DivergenceRecord(decision=decision, gate_outcome=gate.outcome, baseline=baseline)


def synthetic_constraint_set(
    n_constraints: int, decision_class: str = "synthetic_class"
) -> ConstraintSet:
    """A plain n-constraint set (one boolean context flag each) for
    sweeps and property tests; ids sort in positional order.
    """
    if n_constraints < 1:
        raise ConfigError("a synthetic constraint set needs at least one constraint")
    width = len(str(n_constraints - 1))
    constraints = []
    for i in range(n_constraints):
        flag = f"ok_{i:0{width}d}"
        constraints.append(
            ConstraintDef(
                id=f"check_{i:0{width}d}",
                description=f"synthetic check {i}",
                expr=parse_expr(f"exists(context.{flag}) and context.{flag} == true"),
                on_fail="defer",
                source=f"exists(context.{flag}) and context.{flag} == true",
            )
        )
    return build_constraint_set(decision_class, constraints)


@dataclass(frozen=True)
class SweepCell:
    theta: float
    weights: Tuple[float, ...]
    k: int
    coupling: str
    feasible_predicted: bool
    witness_found: bool
    score: float


@dataclass(frozen=True)
class SweepResult:
    """Full sweep table plus the predicate-vs-witness reconciliation."""

    n_features: int
    grid_step: float
    coupling: str
    thetas: Tuple[float, ...]
    feature_names: Tuple[str, ...]
    cells: Tuple[SweepCell, ...]

    def mismatches(self) -> Tuple[SweepCell, ...]:
        return tuple(c for c in self.cells if c.feasible_predicted != c.witness_found)

    def summary(self) -> Dict[str, Any]:
        per_theta: List[Dict[str, Any]] = []
        for theta in self.thetas:
            group = [c for c in self.cells if c.theta == theta]
            found = sum(1 for c in group if c.witness_found)
            bad = sum(1 for c in group if c.feasible_predicted != c.witness_found)
            per_theta.append(
                {
                    "theta": theta,
                    "cells": len(group),
                    "witnesses": found,
                    "witness_fraction": found / len(group) if group else 0.0,
                    "mismatches": bad,
                }
            )
        return {
            "n_features": self.n_features,
            "grid_step": self.grid_step,
            "coupling": self.coupling,
            "total_cells": len(self.cells),
            "total_mismatches": len(self.mismatches()),
            "per_theta": per_theta,
        }

    def to_csv(self) -> str:
        header = ["theta"]
        header += [f"w{i}" for i in range(self.n_features)]
        header += ["k", "coupling", "feasible_predicted", "witness_found", "score"]
        lines = [",".join(header)]
        for cell in self.cells:
            row = [repr(cell.theta)]
            row += [repr(w) for w in cell.weights]
            row += [
                str(cell.k),
                cell.coupling,
                "true" if cell.feasible_predicted else "false",
                "true" if cell.witness_found else "false",
                repr(cell.score),
            ]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"


def sweep_weights(
    n_features: int,
    grid_step: float,
    thetas: Sequence[float],
    coupling: str = "coupled",
    constraint_set: Optional[ConstraintSet] = None,
    cell_cap: int = 10**6,
    clock: str = DEFAULT_CLOCK,
) -> SweepResult:
    """Enumerate weights over {0, step, ..., 1}^n for each theta and k.

    For every cell the table records the predicate's verdict and whether
    the witness construction actually clears theta. Witness decisions
    depend only on (constraint set, k, coupling), so each is built and
    gate-checked once; per-cell work is pure score arithmetic on the
    identical feature vector the witness carries.
    """
    if coupling not in COUPLING_MODES:
        raise ConfigError(f"coupling must be one of {COUPLING_MODES}")
    if n_features < 1:
        raise ConfigError("n_features must be at least 1")
    if not thetas:
        raise ConfigError("thetas must be non-empty")
    if not 0 < grid_step <= 1:
        raise ConfigError("grid_step must be in (0, 1]")
    steps = round(1.0 / grid_step)
    if abs(steps * grid_step - 1.0) > 1e-9:
        raise ConfigError(f"grid_step {grid_step} does not divide 1 evenly")
    cset = constraint_set if constraint_set is not None else synthetic_constraint_set(n_features)
    ids = cset.ids()
    if len(ids) != n_features:
        raise ConfigError(
            f"constraint set has {len(ids)} constraints; the sweep pairs one per feature"
        )
    names = tuple(ids)  # features named after their paired constraints

    theta_list = tuple(sorted(set(float(t) for t in thetas)))
    values = [i * grid_step for i in range(steps + 1)]
    total_cells = (steps + 1) ** n_features * n_features * len(theta_list)
    if total_cells > cell_cap:
        raise GridTooLargeError(
            f"sweep would evaluate {total_cells} cells, above the cap of {cell_cap}",
            cells=total_cells,
            cap=cell_cap,
        )

    # Per-k witness facts, established once: the decision exists, the
    # designated constraint is falsifiable, and the gate rejects it.
    per_k_features: List[Dict[str, float]] = []
    for k in range(n_features):
        features = mode_features(names, k, coupling)
        decision = _construct_witness_decision(cset, ids[k], features, clock)
        gate = evaluate(cset, decision, clock)
        if gate.outcome.kind is OutcomeKind.ALLOW:
            raise AssertionError("internal error: sweep witness was allowed by the gate")
        per_k_features.append(features)

    cells: List[SweepCell] = []
    for theta in theta_list:
        for weights in itertools.product(values, repeat=n_features):
            model = ScoringModel(feature_names=names, weights=weights, theta=theta)
            for k in range(n_features):
                s = score_features(model, per_k_features[k]).score
                cells.append(
                    SweepCell(
                        theta=theta,
                        weights=weights,
                        k=k,
                        coupling=coupling,
                        feasible_predicted=predict_feasible(model, k, coupling),
                        witness_found=s >= theta,
                        score=s,
                    )
                )
    return SweepResult(
        n_features=n_features,
        grid_step=grid_step,
        coupling=coupling,
        thetas=theta_list,
        feature_names=names,
        cells=tuple(cells),
    )


@dataclass(frozen=True)
class CorpusComparison:
    """Join of baseline and gate over a corpus: counts plus the cases
    where the baseline allows and the gate rejects.
    """

    total: int
    both_allow: int
    both_reject: int
    gate_only_allow: int
    divergent_case_ids: Tuple[str, ...]
    divergences: Tuple[DivergenceRecord, ...]

    @property
    def divergent(self) -> int:
        return len(self.divergences)

    def to_value_tree(self) -> Dict[str, Any]:
        return {
            "total": self.total,
            "both_allow": self.both_allow,
            "both_reject": self.both_reject,
            "gate_only_allow": self.gate_only_allow,
            "divergent": self.divergent,
            "divergent_case_ids": list(self.divergent_case_ids),
        }


def compare_on_corpus(
    cases: Sequence[CorpusCase],
    constraint_set: ConstraintSet,
    model: ScoringModel,
    clock: str = DEFAULT_CLOCK,
) -> CorpusComparison:
    """Score and gate every case; collect the divergences."""
    both_allow = both_reject = gate_only = 0
    ids: List[str] = []
    records: List[DivergenceRecord] = []
    for case in cases:
        try:
            baseline = score(model, case.decision)
            gate = evaluate(constraint_set, case.decision, clock)
        except ScoringError as exc:
            raise ScoringError(
                exc.code, f"case {case.id!r}: {Exception.__str__(exc)}", **exc.details
            ) from None
        except ClassMismatchError as exc:
            raise ClassMismatchError(f"case {case.id!r}: {Exception.__str__(exc)}") from None
        gate_allows = gate.outcome.kind is OutcomeKind.ALLOW
        if baseline.allowed and gate_allows:
            both_allow += 1
        elif not baseline.allowed and not gate_allows:
            both_reject += 1
        elif not baseline.allowed and gate_allows:
            gate_only += 1
        else:
            ids.append(case.id)
            records.append(
                DivergenceRecord(
                    decision=case.decision, gate_outcome=gate.outcome, baseline=baseline
                )
            )
    return CorpusComparison(
        total=len(cases),
        both_allow=both_allow,
        both_reject=both_reject,
        gate_only_allow=gate_only,
        divergent_case_ids=tuple(ids),
        divergences=tuple(records),
    )
