"""Right-to-Act gate: deterministic pre-execution decision boundary.

The package answers one question before an AI-generated decision is
executed: does this decision currently satisfy every required
constraint of its class? The answer is a conjunction, not a score;
alongside it ship a compensatory scoring baseline, an analyzer that
demonstrates where the two must disagree, a hash-chained audit log,
an HTTP gateway, and a CLI (``rta``).

The HTTP layer lives in :mod:`rta.service` and is imported explicitly,
so library use never drags in the web stack.
"""

from .audit import (
    AuditLog,
    AuditRecord,
    ReplayMismatch,
    VerifyResult,
    read_records,
    replay,
    verify_file,
)
from .canonical import (
    GENESIS_HASH,
    canonical_bytes,
    canonical_dumps,
    canonical_hash,
    sha256_hex,
)
from .corpus import (
    CaseResult,
    CorpusCase,
    case_from_value,
    load_case_file,
    load_corpus_dir,
    run_corpus,
)
from .decision import (
    DecisionObject,
    canonicalize,
    decision_from_value,
    decision_hash,
    format_clock,
    parse_decision,
    parse_rfc3339,
)
from .divergence import (
    DEFAULT_CLOCK,
    CorpusComparison,
    DivergenceRecord,
    SweepCell,
    SweepResult,
    WitnessSpec,
    compare_on_corpus,
    find_witness,
    mode_features,
    predict_feasible,
    sweep_weights,
    synthetic_constraint_set,
)
from .dsl import (
    ConstraintDef,
    ConstraintSet,
    ConstraintVerdict,
    build_constraint_set,
    eval_constraint,
    load_constraint_dir,
    load_constraint_file,
    parse_constraint_set,
    parse_expr,
)
from .errors import (
    AuditError,
    ClassMismatchError,
    ConfigError,
    ConstraintSetError,
    DecisionParseError,
    GridTooLargeError,
    NotRejectedError,
    RtaError,
    ScoringError,
    UnfalsifiableConstraintError,
)
from .evaluator import (
    GateReport,
    Outcome,
    OutcomeKind,
    check_monotonic_rejection,
    evaluate,
    route_non_action,
    unknown_class_outcome,
)
from .scoring import (
    ScoreReport,
    ScoringModel,
    load_model_file,
    model_from_value,
    parse_model,
    score,
    score_features,
)

__version__ = "0.1.0"

__all__ = [
    "AuditError",
    "AuditLog",
    "AuditRecord",
    "CaseResult",
    "ClassMismatchError",
    "ConfigError",
    "ConstraintDef",
    "ConstraintSet",
    "ConstraintSetError",
    "ConstraintVerdict",
    "CorpusCase",
    "CorpusComparison",
    "DEFAULT_CLOCK",
    "DecisionObject",
    "DecisionParseError",
    "DivergenceRecord",
    "GENESIS_HASH",
    "GateReport",
    "GridTooLargeError",
    "NotRejectedError",
    "Outcome",
    "OutcomeKind",
    "ReplayMismatch",
    "RtaError",
    "ScoreReport",
    "ScoringError",
    "ScoringModel",
    "SweepCell",
    "SweepResult",
    "UnfalsifiableConstraintError",
    "VerifyResult",
    "WitnessSpec",
    "build_constraint_set",
    "canonical_bytes",
    "canonical_dumps",
    "canonical_hash",
    "canonicalize",
    "case_from_value",
    "check_monotonic_rejection",
    "compare_on_corpus",
    "decision_from_value",
    "decision_hash",
    "eval_constraint",
    "evaluate",
    "find_witness",
    "format_clock",
    "load_case_file",
    "load_constraint_dir",
    "load_constraint_file",
    "load_corpus_dir",
    "load_model_file",
    "mode_features",
    "model_from_value",
    "parse_constraint_set",
    "parse_decision",
    "parse_expr",
    "parse_model",
    "parse_rfc3339",
    "predict_feasible",
    "read_records",
    "replay",
    "route_non_action",
    "run_corpus",
    "score",
    "score_features",
    "sha256_hex",
    "sweep_weights",
    "synthetic_constraint_set",
    "unknown_class_outcome",
    "verify_file",
]
