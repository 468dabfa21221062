"""Command-line front door.

Reports go to stdout, diagnostics to stderr. Exit codes are a total
function of the result so scripts can branch without parsing JSON:

  0   ALLOW (or: command succeeded)
  10  DEFER
  11  REQUEST_INFO
  12  ESCALATE
  1   corpus expectation mismatch
  2   usage, parse, or configuration error
  3   audit chain or replay failure
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional

from .audit import replay, verify_file
from .canonical import canonical_dumps
from .corpus import load_corpus_dir, run_corpus
from .decision import DecisionObject, decision_hash, format_clock, parse_decision
from .divergence import DEFAULT_CLOCK, sweep_weights
from .dsl import load_constraint_dir
from .errors import AuditError, GridTooLargeError, RtaError
from .evaluator import OutcomeKind, evaluate
from .scoring import load_model_file

_KIND_EXIT = {
    OutcomeKind.ALLOW: 0,
    OutcomeKind.DEFER: 10,
    OutcomeKind.REQUEST_INFO: 11,
    OutcomeKind.ESCALATE: 12,
}


def _fail(message: str, code: int = 2) -> int:
    print(f"rta: {message}", file=sys.stderr)
    return code


def _now() -> str:
    return format_clock(datetime.now(timezone.utc))


def _cmd_evaluate(args) -> int:
    try:
        sets = load_constraint_dir(args.constraints)
        decision = parse_decision(Path(args.decision).read_bytes())
    except OSError as exc:
        return _fail(str(exc))
    except RtaError as exc:
        return _fail(str(exc))
    cset = sets.get(decision.decision_class)
    if cset is None:
        return _fail(
            f"no constraint set for class {decision.decision_class!r} in {args.constraints}"
        )
    clock = args.clock or _now()
    try:
        report = evaluate(cset, decision, clock)
    except (RtaError, ValueError) as exc:
        return _fail(str(exc))
    print(canonical_dumps(report.to_value_tree()))
    if args.explain:
        for verdict in report.verdicts:
            print(f"{verdict.constraint_id}: {verdict.result} ({verdict.reason})",
                  file=sys.stderr)
        outcome = report.outcome
        print(f"outcome: {outcome.kind.value}"
              + (f" failed={list(outcome.failed_constraints)}" if outcome.failed_constraints else ""),
              file=sys.stderr)
    return _KIND_EXIT[report.outcome.kind]


def _cmd_corpus_run(args) -> int:
    try:
        cases = load_corpus_dir(args.corpus)
        sets = load_constraint_dir(args.constraints)
        model = load_model_file(args.model) if args.model else None
        results = run_corpus(cases, sets, model, args.clock or _now())
    except (OSError, RtaError) as exc:
        return _fail(str(exc))
    width = max(len(r.case.id) for r in results)
    failures = 0
    for result in results:
        status = "ok" if result.ok else "MISMATCH"
        if not result.ok:
            failures += 1
        flags = " DIVERGENT" if result.divergent else ""
        actual = result.gate.outcome.kind.value
        expected = result.case.expected_gate
        line = f"{result.case.id:<{width}}  expected={expected:<12} actual={actual:<12} {status}{flags}"
        if result.baseline is not None:
            line += f"  baseline_allowed={'true' if result.baseline.allowed else 'false'}"
        print(line)
    print(f"{len(results)} cases, {failures} mismatches", file=sys.stderr)
    return 0 if failures == 0 else 1


def _parse_thetas(text: str) -> List[float]:
    thetas = []
    for piece in text.split(","):
        piece = piece.strip()
        if piece:
            thetas.append(float(piece))
    if not thetas:
        raise ValueError("no thresholds given")
    return thetas


def _cmd_diverge(args) -> int:
    try:
        thetas = _parse_thetas(args.theta)
    except ValueError as exc:
        return _fail(f"bad --theta: {exc}")
    try:
        result = sweep_weights(
            n_features=args.features,
            grid_step=args.step,
            thetas=thetas,
            coupling=args.coupling,
            cell_cap=args.cell_cap,
            clock=args.clock,
        )
    except GridTooLargeError as exc:
        return _fail(str(exc))
    except RtaError as exc:
        return _fail(str(exc))
    csv_text = result.to_csv()
    summary = result.summary()
    if args.csv:
        Path(args.csv).write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    summary_text = json.dumps(summary, indent=2, sort_keys=True)
    if args.summary:
        Path(args.summary).write_text(summary_text + "\n", encoding="utf-8")
    else:
        print(summary_text, file=sys.stderr)
    mismatches = result.mismatches()
    if mismatches:
        print(f"rta: {len(mismatches)} cells where the feasibility predicate "
              "disagrees with witness construction", file=sys.stderr)
        return 1
    return 0


def _cmd_audit_verify(args) -> int:
    try:
        result = verify_file(args.log)
    except AuditError as exc:
        return _fail(str(exc), code=3)
    print(canonical_dumps(result.to_value_tree()))
    return 0 if result.ok else 3


def _load_decision_dir(path) -> Dict[str, DecisionObject]:
    root = Path(path)
    if not root.is_dir():
        raise RtaError(f"not a decision directory: {root}")
    decisions: Dict[str, DecisionObject] = {}
    for file in sorted(root.rglob("*.json")):
        tree = json.loads(file.read_text(encoding="utf-8"))
        # Corpus case files carry the decision under a "decision" key;
        # bare decision files are the decision itself.
        if isinstance(tree, dict) and "decision" in tree and "decision_class" not in tree:
            tree = tree["decision"]
        decision = parse_decision(json.dumps(tree))
        decisions[decision_hash(decision)] = decision
    return decisions


def _cmd_audit_replay(args) -> int:
    try:
        sets = load_constraint_dir(args.constraints)
        decisions = _load_decision_dir(args.decisions)
        mismatches = replay(args.log, sets, decisions)
    except (OSError, ValueError) as exc:
        return _fail(str(exc))
    except AuditError as exc:
        return _fail(str(exc), code=3)
    except RtaError as exc:
        return _fail(str(exc))
    if mismatches:
        for mismatch in mismatches:
            print(f"seq {mismatch.seq}: {mismatch.reason}", file=sys.stderr)
        print(canonical_dumps({"ok": False, "mismatches": len(mismatches)}))
        return 3
    print(canonical_dumps({"ok": True, "mismatches": 0}))
    return 0


def _cmd_serve(args) -> int:
    from .service import load_config, serve  # deferred: pulls in the web stack

    config_path = args.config or os.environ.get("RTA_CONFIG")
    if not config_path:
        return _fail("no config: pass --config or set RTA_CONFIG")
    try:
        config = load_config(config_path)
        serve(config)
    except RtaError as exc:
        return _fail(str(exc))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rta",
        description="Pre-execution decision gate: evaluate, compare, audit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="evaluate one decision file against its class")
    p_eval.add_argument("--constraints", required=True, help="constraint-set directory")
    p_eval.add_argument("--decision", required=True, help="decision JSON file")
    p_eval.add_argument("--clock", help="evaluation clock (RFC-3339); default: now (UTC)")
    p_eval.add_argument("--explain", action="store_true",
                        help="print per-constraint reasons to stderr")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_corpus = sub.add_parser("corpus", help="corpus operations")
    corpus_sub = p_corpus.add_subparsers(dest="subcommand", required=True)
    p_run = corpus_sub.add_parser("run", help="run every corpus case, actual vs expected")
    p_run.add_argument("--corpus", required=True, help="corpus case directory")
    p_run.add_argument("--constraints", required=True, help="constraint-set directory")
    p_run.add_argument("--model", help="scoring model JSON (adds baseline columns)")
    p_run.add_argument("--clock", help="evaluation clock (RFC-3339); default: now (UTC)")
    p_run.set_defaults(func=_cmd_corpus_run)

    p_div = sub.add_parser("diverge", help="weight-grid sweep: scorer vs gate")
    p_div.add_argument("--features", type=int, required=True, help="feature count n")
    p_div.add_argument("--step", type=float, required=True, help="weight grid step")
    p_div.add_argument("--theta", required=True, help="comma-separated thresholds")
    p_div.add_argument("--coupling", choices=("coupled", "decoupled"), default="coupled")
    p_div.add_argument("--csv", help="write the sweep table here (default: stdout)")
    p_div.add_argument("--summary", help="write the summary JSON here (default: stderr)")
    p_div.add_argument("--cell-cap", type=int, default=10**6, dest="cell_cap")
    p_div.add_argument("--clock", default=DEFAULT_CLOCK,
                       help="evaluation clock for synthesized decisions")
    p_div.set_defaults(func=_cmd_diverge)

    p_audit = sub.add_parser("audit", help="audit log operations")
    audit_sub = p_audit.add_subparsers(dest="subcommand", required=True)
    p_verify = audit_sub.add_parser("verify", help="verify hash chain and seq integrity")
    p_verify.add_argument("--log", required=True, help="audit log file")
    p_verify.set_defaults(func=_cmd_audit_verify)
    p_replay = audit_sub.add_parser("replay", help="re-evaluate every record and compare")
    p_replay.add_argument("--log", required=True, help="audit log file")
    p_replay.add_argument("--constraints", required=True, help="constraint-set directory")
    p_replay.add_argument("--decisions", required=True,
                          help="directory of decision (or corpus case) JSON files")
    p_replay.set_defaults(func=_cmd_audit_replay)

    p_serve = sub.add_parser("serve", help="run the HTTP gateway")
    p_serve.add_argument("--config", help="gateway config file (or set RTA_CONFIG)")
    p_serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
