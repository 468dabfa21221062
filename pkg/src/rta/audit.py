"""Append-only, hash-chained audit log of gate evaluations.

One canonical JSON record per line. Each record carries the SHA-256 of
its own content plus the previous record's hash, so any edit anywhere
breaks verification at or before the edited record. Appends are
serialized by an exclusive file lock and fsynced before the append
returns; a caller that does not get an acknowledgement must treat the
evaluation as unlogged.

The log stores the evaluation clock of every record, so a log plus the
original decisions and constraint sets replays deterministically.
"""

from __future__ import annotations

import fcntl
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from .canonical import GENESIS_HASH, canonical_bytes, sha256_hex
from .decision import DecisionObject, parse_rfc3339
from .dsl import ConstraintSet
from .errors import AuditError
from .evaluator import GateReport, OutcomeKind, evaluate, unknown_class_outcome

_RECORD_FIELDS = (
    "seq",
    "recorded_at",
    "decision_hash",
    "decision_class",
    "verdicts",
    "outcome_kind",
    "failed_constraints",
    "evaluation_clock",
    "prev_hash",
    "record_hash",
)


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    recorded_at: str
    decision_hash: str
    decision_class: str
    verdicts: Tuple[Dict[str, str], ...]
    outcome_kind: str
    failed_constraints: Tuple[str, ...]
    evaluation_clock: str
    prev_hash: str
    record_hash: str

    def body_tree(self) -> Dict[str, Any]:
        """Every field except record_hash; what the record hash covers."""
        return {
            "seq": self.seq,
            "recorded_at": self.recorded_at,
            "decision_hash": self.decision_hash,
            "decision_class": self.decision_class,
            "verdicts": [dict(v) for v in self.verdicts],
            "outcome_kind": self.outcome_kind,
            "failed_constraints": list(self.failed_constraints),
            "evaluation_clock": self.evaluation_clock,
            "prev_hash": self.prev_hash,
        }

    def to_value_tree(self) -> Dict[str, Any]:
        tree = self.body_tree()
        tree["record_hash"] = self.record_hash
        return tree


def _record_hash(body_tree: Dict[str, Any]) -> str:
    return sha256_hex(canonical_bytes(body_tree))


def _record_from_tree(tree: Any) -> AuditRecord:
    if not isinstance(tree, dict) or set(tree) != set(_RECORD_FIELDS):
        raise ValueError("record does not have exactly the audit fields")
    if not isinstance(tree["seq"], int) or isinstance(tree["seq"], bool):
        raise ValueError("seq must be an integer")
    for key in ("recorded_at", "decision_hash", "decision_class", "outcome_kind",
                "evaluation_clock", "prev_hash", "record_hash"):
        if not isinstance(tree[key], str):
            raise ValueError(f"{key} must be a string")
    verdicts = tree["verdicts"]
    if not isinstance(verdicts, list):
        raise ValueError("verdicts must be a list")
    for verdict in verdicts:
        if (
            not isinstance(verdict, dict)
            or set(verdict) != {"constraint_id", "result", "reason"}
            or not all(isinstance(v, str) for v in verdict.values())
        ):
            raise ValueError("verdict entries must be constraint_id/result/reason strings")
    failed = tree["failed_constraints"]
    if not isinstance(failed, list) or not all(isinstance(f, str) for f in failed):
        raise ValueError("failed_constraints must be a list of ids")
    return AuditRecord(
        seq=tree["seq"],
        recorded_at=tree["recorded_at"],
        decision_hash=tree["decision_hash"],
        decision_class=tree["decision_class"],
        verdicts=tuple(dict(v) for v in verdicts),
        outcome_kind=tree["outcome_kind"],
        failed_constraints=tuple(failed),
        evaluation_clock=tree["evaluation_clock"],
        prev_hash=tree["prev_hash"],
        record_hash=tree["record_hash"],
    )


def _check_record(raw_line: bytes, expected_seq: int, expected_prev: str) -> AuditRecord:
    """Parse and verify one line; ValueError describes any defect."""
    try:
        tree = json.loads(raw_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValueError(f"unparseable record: {exc}") from None
    record = _record_from_tree(tree)
    # The line must be the canonical serialization, byte for byte.
    if canonical_bytes(record.to_value_tree()) != raw_line:
        raise ValueError("record is not in canonical form")
    if record.seq != expected_seq:
        raise ValueError(f"seq {record.seq}, expected {expected_seq} (gapless from 0)")
    if record.prev_hash != expected_prev:
        raise ValueError("prev_hash does not match the predecessor's record_hash")
    recomputed = _record_hash(record.body_tree())
    if record.record_hash != recomputed:
        raise ValueError("record_hash does not match the record's content")
    return record


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    first_bad_seq: Optional[int]  # index of the first failing record
    records: int  # records verified good

    def to_value_tree(self) -> Dict[str, Any]:
        return {"ok": self.ok, "first_bad_seq": self.first_bad_seq, "records": self.records}


def _read_lines(path: Path) -> List[bytes]:
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise AuditError("IO_FAILURE", f"cannot read audit log {path}: {exc}") from None
    if not blob:
        return []
    lines = blob.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    return lines


def verify_file(path) -> VerifyResult:
    """Check hashes, linkage, and gapless seqs over the whole file.

    An empty (or absent) log is a vacuously valid chain.
    """
    path = Path(path)
    if not path.exists():
        return VerifyResult(ok=True, first_bad_seq=None, records=0)
    lines = _read_lines(path)
    prev = GENESIS_HASH
    for index, line in enumerate(lines):
        try:
            record = _check_record(line, expected_seq=index, expected_prev=prev)
        except ValueError:
            return VerifyResult(ok=False, first_bad_seq=index, records=index)
        prev = record.record_hash
    return VerifyResult(ok=True, first_bad_seq=None, records=len(lines))


def read_records(path) -> Tuple[AuditRecord, ...]:
    """Load a fully verified log; CHAIN_CORRUPT if any record fails."""
    path = Path(path)
    result = verify_file(path)
    if not result.ok:
        raise AuditError(
            "CHAIN_CORRUPT",
            f"audit log {path} fails verification at seq {result.first_bad_seq}",
            first_bad_seq=result.first_bad_seq,
        )
    if not path.exists():
        return ()
    records = []
    prev = GENESIS_HASH
    for index, line in enumerate(_read_lines(path)):
        record = _check_record(line, expected_seq=index, expected_prev=prev)
        prev = record.record_hash
        records.append(record)
    return tuple(records)


class AuditLog:
    """Single writer over one log file; readers never need this class.

    Opening verifies the existing chain (fail-closed: a corrupt tail
    means no more appends) and takes an exclusive lock for the lifetime
    of the object.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._file = None
        records = read_records(self.path)  # raises CHAIN_CORRUPT on a bad tail
        self.last_seq = records[-1].seq if records else -1
        self._last_hash = records[-1].record_hash if records else GENESIS_HASH
        try:
            self._file = open(self.path, "ab")
            fcntl.flock(self._file.fileno(), fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError as exc:
            if self._file is not None:
                self._file.close()
                self._file = None
            raise AuditError(
                "IO_FAILURE", f"cannot open audit log {self.path} for append: {exc}"
            ) from None

    @property
    def is_open(self) -> bool:
        return self._file is not None

    def __enter__(self) -> "AuditLog":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def close(self) -> None:
        if self._file is not None:
            try:
                fcntl.flock(self._file.fileno(), fcntl.LOCK_UN)
            finally:
                self._file.close()
                self._file = None

    def append(self, report: GateReport, now: str) -> AuditRecord:
        """Persist one evaluation durably; returns only after fsync."""
        if self._file is None:
            raise AuditError("IO_FAILURE", "audit log is closed")
        parse_rfc3339(now)
        body = {
            "seq": self.last_seq + 1,
            "recorded_at": now,
            "decision_hash": report.decision_hash,
            "decision_class": report.decision_class,
            "verdicts": [v.to_value_tree() for v in report.verdicts],
            "outcome_kind": report.outcome.kind.value,
            "failed_constraints": list(report.outcome.failed_constraints),
            "evaluation_clock": report.evaluation_clock,
            "prev_hash": self._last_hash,
        }
        record_hash = _record_hash(body)
        tree = dict(body)
        tree["record_hash"] = record_hash
        line = canonical_bytes(tree) + b"\n"
        try:
            self._file.write(line)
            self._file.flush()
            os.fsync(self._file.fileno())
        except OSError as exc:
            raise AuditError(
                "IO_FAILURE", f"append to {self.path} not acknowledged: {exc}"
            ) from None
        self.last_seq += 1
        self._last_hash = record_hash
        return _record_from_tree(tree)


@dataclass(frozen=True)
class ReplayMismatch:
    seq: int
    reason: str


def replay(
    path,
    constraint_sets: Mapping[str, ConstraintSet],
    decisions: Mapping[str, DecisionObject],
    unknown_class_policy: str = "escalate",
) -> Tuple[ReplayMismatch, ...]:
    """Re-evaluate every record with its stored clock; list divergences.

    ``decisions`` is keyed by decision hash. A hash the caller cannot
    supply is MISSING_DECISION: without the original decision the record
    is unverifiable, which is an error, not a silent skip.
    """
    mismatches: List[ReplayMismatch] = []
    for record in read_records(path):
        decision = decisions.get(record.decision_hash)
        if decision is None:
            raise AuditError(
                "MISSING_DECISION",
                f"no decision supplied for hash {record.decision_hash} (seq {record.seq})",
                decision_hash=record.decision_hash,
                seq=record.seq,
            )
        cset = constraint_sets.get(record.decision_class)
        if cset is None:
            # A gateway running the escalate policy logs unknown classes
            # with no verdicts; that shape is re-derivable without a set.
            if unknown_class_policy == "escalate":
                outcome = unknown_class_outcome(record.decision_class)
                expected_verdicts: Tuple[Dict[str, str], ...] = ()
                expected_kind = outcome.kind.value
                expected_failed: Tuple[str, ...] = outcome.failed_constraints
            else:
                mismatches.append(
                    ReplayMismatch(record.seq, f"no constraint set for class "
                                               f"{record.decision_class!r}")
                )
                continue
        else:
            report = evaluate(cset, decision, record.evaluation_clock)
            expected_verdicts = tuple(v.to_value_tree() for v in report.verdicts)
            expected_kind = report.outcome.kind.value
            expected_failed = report.outcome.failed_constraints
        problems = []
        if record.outcome_kind != expected_kind:
            problems.append(
                f"outcome_kind logged {record.outcome_kind!r}, recomputed {expected_kind!r}"
            )
        if record.failed_constraints != tuple(expected_failed):
            problems.append(
                f"failed_constraints logged {list(record.failed_constraints)}, "
                f"recomputed {list(expected_failed)}"
            )
        if record.verdicts != expected_verdicts:
            problems.append("verdict list differs from recomputation")
        if problems:
            mismatches.append(ReplayMismatch(record.seq, "; ".join(problems)))
    return tuple(mismatches)
