"""Typed errors raised by the gate.

Every error carries a stable machine-readable ``code`` so callers (CLI,
service, tests) can branch without parsing messages. Evaluation itself
never raises: constraint failures fold into fail verdicts. These errors
cover loading, wiring, and configuration problems, which must be loud.
"""

from __future__ import annotations


class RtaError(Exception):
    """Base class; ``code`` is a stable UPPER_SNAKE identifier."""

    code = "RTA_ERROR"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def __str__(self) -> str:
        return f"{self.code}: {super().__str__()}"


class DecisionParseError(RtaError):
    """A decision document failed validation; exactly one is raised per input."""

    code = "MALFORMED_JSON"

    def __init__(self, code: str, message: str, **details):
        super().__init__(message, **details)
        self.code = code


class ConstraintSetError(RtaError):
    """A constraint-set file failed to load or type-check."""

    code = "SYNTAX_ERROR"

    def __init__(self, code: str, message: str, **details):
        super().__init__(message, **details)
        self.code = code


class ClassMismatchError(RtaError):
    """Caller evaluated a decision against the wrong class's constraint set."""

    code = "CLASS_MISMATCH"


class NotRejectedError(RtaError):
    """Monotonic-rejection check was asked about a decision the gate allows."""

    code = "NOT_REJECTED"


class ScoringError(RtaError):
    """Scoring model rejected its input (bad model or missing feature)."""

    code = "SCORING_ERROR"

    def __init__(self, code: str, message: str, **details):
        super().__init__(message, **details)
        self.code = code


class UnfalsifiableConstraintError(RtaError):
    """Witness construction could not make the designated constraint fail."""

    code = "UNFALSIFIABLE_CONSTRAINT"

    def __init__(self, constraint_id: str, message: str = ""):
        super().__init__(message or f"constraint {constraint_id!r} cannot be made to fail")
        self.constraint_id = constraint_id


class GridTooLargeError(RtaError):
    """Sweep grid exceeds the configured cell cap."""

    code = "GRID_TOO_LARGE"


class AuditError(RtaError):
    """Audit log could not be read, written, or replayed."""

    code = "IO_FAILURE"

    def __init__(self, code: str, message: str, **details):
        super().__init__(message, **details)
        self.code = code


class ConfigError(RtaError):
    """Gateway or CLI configuration is invalid; startup must fail loudly."""

    code = "CONFIG_ERROR"
