"""Declarative constraint language: parsing, type checking, evaluation.

Constraints are boolean expressions over decision fields. The language
is deliberately small: literals, field paths, comparisons, boolean
connectives, ``exists(path)``, ``in(path, [...])``, and
``age_seconds(timing)``. No regular expressions, no arithmetic, no
external lookups, no randomness. Full grammar in
docs/constraint-language.md.

Evaluation is total and fail-closed: a missing or null referenced field
(outside ``exists``) and any runtime type incident fold into a ``fail``
verdict with a reason, never an exception. Connectives evaluate both
operands (no short-circuit), so a missing reference anywhere in an
expression always poisons the verdict to fail.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .decision import CONSTRAINT_VISIBLE_FIELDS, DecisionObject, parse_rfc3339
from .errors import ConstraintSetError

ON_FAIL_KINDS = ("defer", "request_info", "escalate")
ID_RE = re.compile(r"^[a-z0-9_]+$")

MISSING = object()  # assignment sentinel: remove the path entirely


# ---------------------------------------------------------------------------
# Abstract syntax
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Literal:
    value: Union[str, int, float, bool]


@dataclass(frozen=True)
class Path:
    parts: Tuple[str, ...]

    def dotted(self) -> str:
        return ".".join(self.parts)


@dataclass(frozen=True)
class Compare:
    op: str  # ==  !=  <  <=  >  >=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # and  or
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class Exists:
    path: Path


@dataclass(frozen=True)
class InList:
    path: Path
    items: Tuple[Literal, ...]


@dataclass(frozen=True)
class AgeSeconds:
    """Seconds from the decision's timing to the evaluation clock."""


Expr = Union[Literal, Path, Compare, BoolOp, Not, Exists, InList, AgeSeconds]


def render(expr: Expr) -> str:
    """Source-like rendering, used in error messages and docs."""
    if isinstance(expr, Literal):
        if isinstance(expr.value, bool):
            return "true" if expr.value else "false"
        if isinstance(expr.value, str):
            return json.dumps(expr.value)
        return repr(expr.value)
    if isinstance(expr, Path):
        return expr.dotted()
    if isinstance(expr, Compare):
        return f"{render(expr.left)} {expr.op} {render(expr.right)}"
    if isinstance(expr, BoolOp):
        return f"({render(expr.left)} {expr.op} {render(expr.right)})"
    if isinstance(expr, Not):
        return f"not {render(expr.operand)}"
    if isinstance(expr, Exists):
        return f"exists({expr.path.dotted()})"
    if isinstance(expr, InList):
        items = ", ".join(render(i) for i in expr.items)
        return f"in({expr.path.dotted()}, [{items}])"
    if isinstance(expr, AgeSeconds):
        return "age_seconds(timing)"
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|<|>)
  | (?P<punct>[().,\[\]])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "not", "true", "false"}


@dataclass(frozen=True)
class _Token:
    kind: str  # number string ident keyword op punct end
    text: str
    line: int
    col: int


def _syntax_error(message: str, line: int, col: int) -> ConstraintSetError:
    return ConstraintSetError(
        "SYNTAX_ERROR", f"{message} (line {line}, column {col})", line=line, col=col
    )


def _tokenize(source: str) -> List[_Token]:
    tokens: List[_Token] = []
    line, col = 1, 1
    pos = 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise _syntax_error(f"unexpected character {source[pos]!r}", line, col)
        text = match.group(0)
        kind = match.lastgroup or ""
        if kind != "ws":
            if kind == "ident" and text in _KEYWORDS:
                kind = "keyword"
            tokens.append(_Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = match.end()
    tokens.append(_Token("end", "", line, col))
    return tokens


def _unescape_string(token: _Token) -> str:
    try:
        return json.loads(token.text)
    except json.JSONDecodeError:
        raise _syntax_error("bad string escape", token.line, token.col) from None


# ---------------------------------------------------------------------------
# Parser (recursive descent; precedence: or < and < not < comparison)
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, tokens: List[_Token]):
        self.tokens = tokens
        self.index = 0

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, kind: str, text: Optional[str] = None) -> _Token:
        token = self.peek()
        if token.kind != kind or (text is not None and token.text != text):
            want = text or kind
            raise _syntax_error(f"expected {want!r}, found {token.text or 'end of input'!r}",
                                token.line, token.col)
        return self.advance()

    def parse(self) -> Expr:
        expr = self.or_expr()
        tail = self.peek()
        if tail.kind != "end":
            raise _syntax_error(f"unexpected trailing input {tail.text!r}", tail.line, tail.col)
        return expr

    def or_expr(self) -> Expr:
        expr = self.and_expr()
        while self.peek().kind == "keyword" and self.peek().text == "or":
            self.advance()
            expr = BoolOp("or", expr, self.and_expr())
        return expr

    def and_expr(self) -> Expr:
        expr = self.not_expr()
        while self.peek().kind == "keyword" and self.peek().text == "and":
            self.advance()
            expr = BoolOp("and", expr, self.not_expr())
        return expr

    def not_expr(self) -> Expr:
        if self.peek().kind == "keyword" and self.peek().text == "not":
            self.advance()
            return Not(self.not_expr())
        return self.comparison()

    def comparison(self) -> Expr:
        left = self.operand()
        if self.peek().kind == "op":
            op = self.advance().text
            right = self.operand()
            return Compare(op, left, right)
        return left

    def operand(self) -> Expr:
        token = self.peek()
        if token.kind == "punct" and token.text == "(":
            self.advance()
            inner = self.or_expr()
            self.expect("punct", ")")
            return inner
        if token.kind == "number":
            self.advance()
            text = token.text
            value = float(text) if any(c in text for c in ".eE") else int(text)
            return Literal(value)
        if token.kind == "string":
            self.advance()
            return Literal(_unescape_string(token))
        if token.kind == "keyword" and token.text in ("true", "false"):
            self.advance()
            return Literal(token.text == "true")
        if token.kind == "ident":
            if token.text == "exists":
                return self.exists_call()
            if token.text == "in":
                return self.in_call()
            if token.text == "age_seconds":
                return self.age_call()
            return self.path()
        raise _syntax_error(f"expected an operand, found {token.text or 'end of input'!r}",
                            token.line, token.col)

    def path(self) -> Path:
        first = self.expect("ident")
        parts = [first.text]
        while self.peek().kind == "punct" and self.peek().text == ".":
            self.advance()
            parts.append(self.expect("ident").text)
        return Path(tuple(parts))

    def exists_call(self) -> Exists:
        self.advance()
        self.expect("punct", "(")
        path = self.path()
        self.expect("punct", ")")
        return Exists(path)

    def in_call(self) -> InList:
        self.advance()
        self.expect("punct", "(")
        path = self.path()
        self.expect("punct", ",")
        self.expect("punct", "[")
        items: List[Literal] = []
        if not (self.peek().kind == "punct" and self.peek().text == "]"):
            items.append(self.literal())
            while self.peek().kind == "punct" and self.peek().text == ",":
                self.advance()
                items.append(self.literal())
        self.expect("punct", "]")
        self.expect("punct", ")")
        return InList(path, tuple(items))

    def age_call(self) -> AgeSeconds:
        token = self.advance()
        self.expect("punct", "(")
        path = self.path()
        if path.parts != ("timing",):
            raise _syntax_error("age_seconds takes the timing field only", token.line, token.col)
        self.expect("punct", ")")
        return AgeSeconds()

    def literal(self) -> Literal:
        token = self.peek()
        if token.kind == "number":
            self.advance()
            text = token.text
            value = float(text) if any(c in text for c in ".eE") else int(text)
            return Literal(value)
        if token.kind == "string":
            self.advance()
            return Literal(_unescape_string(token))
        if token.kind == "keyword" and token.text in ("true", "false"):
            self.advance()
            return Literal(token.text == "true")
        raise _syntax_error(f"expected a literal, found {token.text or 'end of input'!r}",
                            token.line, token.col)


def parse_expr(source: str) -> Expr:
    """Parse one expression; SYNTAX_ERROR carries line and column."""
    return _Parser(_tokenize(source)).parse()


# ---------------------------------------------------------------------------
# Static type checking
# ---------------------------------------------------------------------------

# Static types. ANY covers context paths, whose runtime type is unknown;
# incidents there fold to fail at evaluation.
T_STRING, T_NUMBER, T_BOOLEAN, T_TIMESTAMP, T_ANY = "string", "number", "boolean", "timestamp", "any"

_FIELD_TYPES = {
    "decision_class": T_STRING,
    "operation": T_STRING,
    "target": T_STRING,
    "scope": T_STRING,
    "timing": T_TIMESTAMP,
}


def _type_error(message: str, expr: Expr) -> ConstraintSetError:
    return ConstraintSetError("TYPE_MISMATCH", f"{message}: {render(expr)}")


def _path_type(path: Path) -> str:
    head = path.parts[0]
    if head == "context":
        if len(path.parts) < 2:
            raise ConstraintSetError(
                "UNKNOWN_PATH", "the context map itself is not addressable; name a key",
                path=path.dotted(),
            )
        return T_ANY
    if head in _FIELD_TYPES and len(path.parts) == 1:
        return _FIELD_TYPES[head]
    raise ConstraintSetError(
        "UNKNOWN_PATH",
        f"unknown path {path.dotted()!r}; constraints may reference "
        f"{', '.join(CONSTRAINT_VISIBLE_FIELDS)} and context.*",
        path=path.dotted(),
    )


def _literal_type(value: Any) -> str:
    if isinstance(value, bool):
        return T_BOOLEAN
    if isinstance(value, str):
        return T_STRING
    return T_NUMBER


def _is_rfc3339_literal(expr: Expr) -> bool:
    if not (isinstance(expr, Literal) and isinstance(expr.value, str)):
        return False
    try:
        parse_rfc3339(expr.value)
        return True
    except ValueError:
        return False


def _check_equality(node: Compare, left_t: str, right_t: str) -> None:
    for a, b, a_expr, b_expr in ((left_t, right_t, node.left, node.right),
                                 (right_t, left_t, node.right, node.left)):
        if a == T_TIMESTAMP and b == T_STRING:
            if not _is_rfc3339_literal(b_expr):
                raise _type_error("timestamp compared to a non-timestamp string", node)
            return
    if T_ANY in (left_t, right_t) or left_t == right_t:
        return
    raise _type_error(f"cannot compare {left_t} to {right_t}", node)


def _check_ordering(node: Compare, left_t: str, right_t: str) -> None:
    ok_number = {T_NUMBER, T_ANY}
    if left_t in ok_number and right_t in ok_number:
        return
    for a, b, b_expr in ((left_t, right_t, node.right), (right_t, left_t, node.left)):
        if a == T_TIMESTAMP:
            if b in (T_TIMESTAMP, T_ANY):
                return
            if b == T_STRING and _is_rfc3339_literal(b_expr):
                return
    raise _type_error(f"ordering requires numbers or timestamps, got {left_t} vs {right_t}", node)


def type_check(expr: Expr) -> str:
    """Return the expression's static type; raise on mismatch or bad path.

    The constraint loader additionally requires the whole expression to
    be boolean-typed (a bare context path is accepted and checked for a
    boolean value at evaluation time).
    """
    if isinstance(expr, Literal):
        return _literal_type(expr.value)
    if isinstance(expr, Path):
        return _path_type(expr)
    if isinstance(expr, AgeSeconds):
        return T_NUMBER
    if isinstance(expr, Exists):
        _path_type(expr.path)
        return T_BOOLEAN
    if isinstance(expr, InList):
        path_t = _path_type(expr.path)
        if not expr.items:
            raise _type_error("in() needs at least one list element", expr)
        item_types = {_literal_type(item.value) for item in expr.items}
        if len(item_types) > 1:
            raise _type_error("in() list elements must share one type", expr)
        item_t = item_types.pop()
        if path_t not in (T_ANY, item_t):
            raise _type_error(f"cannot test {path_t} membership in a {item_t} list", expr)
        return T_BOOLEAN
    if isinstance(expr, Not):
        operand_t = type_check(expr.operand)
        if operand_t not in (T_BOOLEAN, T_ANY):
            raise _type_error(f"'not' needs a boolean, got {operand_t}", expr)
        return T_BOOLEAN
    if isinstance(expr, BoolOp):
        for side in (expr.left, expr.right):
            side_t = type_check(side)
            if side_t not in (T_BOOLEAN, T_ANY):
                raise _type_error(f"{expr.op!r} needs boolean operands, got {side_t}", expr)
        return T_BOOLEAN
    if isinstance(expr, Compare):
        left_t = type_check(expr.left)
        right_t = type_check(expr.right)
        if expr.op in ("==", "!="):
            _check_equality(expr, left_t, right_t)
        else:
            _check_ordering(expr, left_t, right_t)
        return T_BOOLEAN
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Constraint definitions and sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintDef:
    """One required predicate plus its on-fail routing hint."""

    id: str
    description: str
    expr: Expr
    on_fail: str = "defer"
    source: str = ""  # original expression text, kept for reports


@dataclass(frozen=True)
class ConstraintSet:
    """All required constraints for one decision class.

    Constraint order is lexicographic by id, fixed at load. Order only
    affects verdict listing; the outcome is a conjunction and cannot
    depend on it.
    """

    decision_class: str
    constraints: Tuple[ConstraintDef, ...]

    def ids(self) -> Tuple[str, ...]:
        return tuple(c.id for c in self.constraints)


@dataclass(frozen=True)
class ConstraintVerdict:
    """Boolean result of one constraint against one decision."""

    constraint_id: str
    result: str  # pass | fail
    reason: str

    @property
    def passed(self) -> bool:
        return self.result == "pass"

    def to_value_tree(self) -> Dict[str, str]:
        return {"constraint_id": self.constraint_id, "result": self.result, "reason": self.reason}


def build_constraint_set(
    decision_class: str,
    constraints: Sequence[ConstraintDef],
    allow_empty: bool = False,
) -> ConstraintSet:
    """Validate ids, type-check expressions, fix lexicographic order."""
    if not isinstance(decision_class, str) or not decision_class:
        raise ConstraintSetError("SYNTAX_ERROR", "decision_class must be a non-empty string")
    if not constraints and not allow_empty:
        raise ConstraintSetError(
            "EMPTY_SET",
            f"constraint set for {decision_class!r} is empty; an empty set allows "
            "everything, which must be opted into with allow_empty",
        )
    seen = set()
    for constraint in constraints:
        if not ID_RE.match(constraint.id):
            raise ConstraintSetError(
                "SYNTAX_ERROR", f"constraint id {constraint.id!r} must match [a-z0-9_]+"
            )
        if constraint.id in seen:
            raise ConstraintSetError("DUPLICATE_ID", f"duplicate constraint id {constraint.id!r}",
                                     id=constraint.id)
        seen.add(constraint.id)
        if constraint.on_fail not in ON_FAIL_KINDS:
            raise ConstraintSetError(
                "SYNTAX_ERROR",
                f"constraint {constraint.id!r}: on_fail must be one of {ON_FAIL_KINDS}",
            )
        try:
            expr_type = type_check(constraint.expr)
            if expr_type not in (T_BOOLEAN, T_ANY):
                # ANY (a bare context path) gets its boolean check at
                # evaluation time; anything else is statically wrong.
                raise _type_error(f"expression is {expr_type}, not boolean", constraint.expr)
        except ConstraintSetError as exc:
            raise ConstraintSetError(
                exc.code, f"constraint {constraint.id!r}: {Exception.__str__(exc)}", **exc.details
            ) from None
    ordered = tuple(sorted(constraints, key=lambda c: c.id))
    return ConstraintSet(decision_class=decision_class, constraints=ordered)


def _constraint_from_table(table: Any, index: int) -> ConstraintDef:
    if not isinstance(table, dict):
        raise ConstraintSetError("SYNTAX_ERROR", f"constraint #{index} must be a table/object")
    for key in ("id", "expr"):
        if key not in table:
            raise ConstraintSetError("SYNTAX_ERROR", f"constraint #{index} lacks {key!r}")
    cid = table["id"]
    if not isinstance(cid, str):
        raise ConstraintSetError("SYNTAX_ERROR", f"constraint #{index}: id must be a string")
    expr_text = table["expr"]
    if not isinstance(expr_text, str):
        raise ConstraintSetError("SYNTAX_ERROR", f"constraint {cid!r}: expr must be a string")
    try:
        expr = parse_expr(expr_text)
    except ConstraintSetError as exc:
        raise ConstraintSetError(
            exc.code, f"constraint {cid!r}: {Exception.__str__(exc)}", **exc.details
        ) from None
    description = table.get("description", "")
    if not isinstance(description, str):
        raise ConstraintSetError("SYNTAX_ERROR", f"constraint {cid!r}: description must be a string")
    on_fail = table.get("on_fail", "defer")
    if not isinstance(on_fail, str):
        raise ConstraintSetError("SYNTAX_ERROR", f"constraint {cid!r}: on_fail must be a string")
    return ConstraintDef(id=cid, description=description, expr=expr,
                         on_fail=on_fail, source=expr_text)


def parse_constraint_set(data: bytes | str, fmt: str = "toml") -> ConstraintSet:
    """Load one constraint-set document (TOML or JSON).

    Top-level keys: decision_class (string), constraint (array of
    tables), allow_empty (bool, default false).
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    if fmt == "toml":
        try:
            tree = tomllib.loads(data.decode("utf-8"))
        except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise ConstraintSetError("SYNTAX_ERROR", f"invalid TOML: {exc}") from None
    elif fmt == "json":
        try:
            tree = json.loads(data.decode("utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ConstraintSetError("SYNTAX_ERROR", f"invalid JSON: {exc}") from None
    else:
        raise ValueError(f"unknown constraint file format {fmt!r}")
    if not isinstance(tree, dict):
        raise ConstraintSetError("SYNTAX_ERROR", "constraint document must be a table/object")
    if "decision_class" not in tree:
        raise ConstraintSetError("SYNTAX_ERROR", "missing decision_class")
    allow_empty = tree.get("allow_empty", False)
    if not isinstance(allow_empty, bool):
        raise ConstraintSetError("SYNTAX_ERROR", "allow_empty must be a boolean")
    raw = tree.get("constraint", [])
    if not isinstance(raw, list):
        raise ConstraintSetError("SYNTAX_ERROR", "constraint must be an array of tables")
    constraints = [_constraint_from_table(t, i) for i, t in enumerate(raw)]
    return build_constraint_set(tree["decision_class"], constraints, allow_empty=allow_empty)


def load_constraint_file(path) -> ConstraintSet:
    """Load a .toml or .json constraint-set file."""
    from pathlib import Path as _P

    path = _P(path)
    fmt = "json" if path.suffix.lower() == ".json" else "toml"
    return parse_constraint_set(path.read_bytes(), fmt=fmt)


def load_constraint_dir(path) -> Dict[str, ConstraintSet]:
    """Load every constraint-set file in a directory, keyed by class.

    Two files claiming the same decision_class is a configuration error.
    """
    from pathlib import Path as _P

    root = _P(path)
    if not root.is_dir():
        raise ConstraintSetError("SYNTAX_ERROR", f"not a directory: {root}")
    sets: Dict[str, ConstraintSet] = {}
    for file in sorted(root.iterdir()):
        if file.suffix.lower() not in (".toml", ".json") or not file.is_file():
            continue
        loaded = load_constraint_file(file)
        if loaded.decision_class in sets:
            raise ConstraintSetError(
                "DUPLICATE_ID",
                f"decision class {loaded.decision_class!r} defined by more than one file",
            )
        sets[loaded.decision_class] = loaded
    return sets


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

class _Incident(Exception):
    """Missing data or a runtime type problem; folds into a fail verdict."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _lookup(path: Path, decision: DecisionObject) -> Any:
    """Resolve a path; missing or null raises an incident (fail-closed)."""
    head = path.parts[0]
    if head != "context":
        value: Any = getattr(decision, head)
        if head == "timing":
            return parse_rfc3339(value)
        return value
    node: Any = decision.context
    for part in path.parts[1:]:
        if not isinstance(node, dict) or part not in node:
            raise _Incident(f"missing path {path.dotted()} (fail-closed)")
        node = node[part]
    if node is None:
        raise _Incident(f"null at path {path.dotted()} (fail-closed)")
    return node


def _path_present(path: Path, decision: DecisionObject) -> bool:
    try:
        _lookup(path, decision)
        return True
    except _Incident:
        return False


def _as_instant(value: Any, where: str) -> datetime:
    if isinstance(value, datetime):
        return value
    if isinstance(value, str):
        try:
            return parse_rfc3339(value)
        except ValueError:
            raise _Incident(
                f"type incident: {where} is not an RFC-3339 timestamp (fail-closed)"
            ) from None
    raise _Incident(f"type incident: {where} is not a timestamp (fail-closed)")


def _compare(op: str, left: Any, right: Any, node: Compare) -> bool:
    where = render(node)
    if isinstance(left, datetime) or isinstance(right, datetime):
        left = _as_instant(left, where)
        right = _as_instant(right, where)
    else:
        left_is_bool, right_is_bool = isinstance(left, bool), isinstance(right, bool)
        left_is_num = not left_is_bool and isinstance(left, (int, float))
        right_is_num = not right_is_bool and isinstance(right, (int, float))
        same = (
            (left_is_bool and right_is_bool)
            or (left_is_num and right_is_num)
            or (isinstance(left, str) and isinstance(right, str))
        )
        if not same:
            raise _Incident(f"type incident: mismatched operand types in {where} (fail-closed)")
        if op not in ("==", "!=") and not (left_is_num and right_is_num):
            raise _Incident(f"type incident: ordering needs numbers in {where} (fail-closed)")
    if op == "==":
        return left == right
    if op == "!=":
        return left != right
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    return left >= right


def _eval(expr: Expr, decision: DecisionObject, clock: datetime) -> Any:
    # Deliberately eager: both operands of every connective are
    # evaluated so that a missing reference anywhere fails the verdict.
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Path):
        return _lookup(expr, decision)
    if isinstance(expr, AgeSeconds):
        return (clock - parse_rfc3339(decision.timing)).total_seconds()
    if isinstance(expr, Exists):
        return _path_present(expr.path, decision)
    if isinstance(expr, InList):
        value = _lookup(expr.path, decision)
        for item in expr.items:
            same_kind = (
                isinstance(value, bool) == isinstance(item.value, bool)
                and isinstance(value, str) == isinstance(item.value, str)
            )
            if same_kind and value == item.value:
                return True
        return False
    if isinstance(expr, Not):
        return not _require_bool(_eval(expr.operand, decision, clock), expr.operand)
    if isinstance(expr, BoolOp):
        left = _eval(expr.left, decision, clock)
        right = _eval(expr.right, decision, clock)
        left_b = _require_bool(left, expr.left)
        right_b = _require_bool(right, expr.right)
        return (left_b and right_b) if expr.op == "and" else (left_b or right_b)
    if isinstance(expr, Compare):
        left = _eval(expr.left, decision, clock)
        right = _eval(expr.right, decision, clock)
        return _compare(expr.op, left, right, expr)
    raise TypeError(f"not an expression node: {expr!r}")


def _require_bool(value: Any, expr: Expr) -> bool:
    if isinstance(value, bool):
        return value
    raise _Incident(f"type incident: {render(expr)} is not boolean (fail-closed)")


def eval_constraint(
    constraint: ConstraintDef, decision: DecisionObject, clock: str
) -> ConstraintVerdict:
    """Evaluate one constraint; deterministic in (constraint, decision, clock).

    Never raises for data problems: missing paths, nulls, and type
    incidents all yield a fail verdict whose reason names the cause.
    """
    clock_dt = parse_rfc3339(clock)
    try:
        value = _eval(constraint.expr, decision, clock_dt)
        ok = _require_bool(value, constraint.expr)
    except _Incident as incident:
        return ConstraintVerdict(constraint.id, "fail", incident.reason)
    if ok:
        return ConstraintVerdict(constraint.id, "pass", "expression evaluated true")
    return ConstraintVerdict(constraint.id, "fail", "expression evaluated false")


# ---------------------------------------------------------------------------
# Assignment synthesis (test/analysis machinery, not the enforcement path)
#
# The divergence analyzer and the monotonic-rejection harness both need
# to force a given constraint to pass or fail by editing only the fields
# it references. Candidate values are read off the expression's own
# literals and tried exhaustively; this is a finite search, not a
# solver, and it reports honestly when it finds nothing.
# ---------------------------------------------------------------------------

def referenced_paths(expr: Expr) -> Tuple[Path, ...]:
    """Every path the expression references, exists() included, in order."""
    found: List[Path] = []

    def walk(node: Expr) -> None:
        if isinstance(node, Path):
            found.append(node)
        elif isinstance(node, Exists):
            found.append(node.path)
        elif isinstance(node, InList):
            found.append(node.path)
        elif isinstance(node, Compare):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, BoolOp):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Not):
            walk(node.operand)
        elif isinstance(node, AgeSeconds):
            found.append(Path(("timing",)))

    walk(expr)
    unique: List[Path] = []
    for path in found:
        if path not in unique:
            unique.append(path)
    return tuple(unique)


def _shift_instant(text: str, seconds: float) -> str:
    from .decision import format_clock

    return format_clock(parse_rfc3339(text) + timedelta(seconds=seconds))


def _candidates_for(expr: Expr, path: Path, clock: str) -> List[Any]:
    """Plausible values for one path, harvested from the expression."""
    pool: List[Any] = []

    def add(value: Any) -> None:
        if not any(type(v) is type(value) and v == value for v in pool):
            pool.append(value)

    def from_literal(value: Any, ordered: bool) -> None:
        add(value)
        if isinstance(value, bool):
            add(not value)
        elif isinstance(value, (int, float)):
            add(value + 1)
            add(value - 1)
        elif isinstance(value, str):
            try:
                parse_rfc3339(value)
                add(_shift_instant(value, 1))
                add(_shift_instant(value, -1))
            except ValueError:
                add(value + "_x" if value else "x")
        if ordered and isinstance(value, (int, float)) and not isinstance(value, bool):
            add(value + 0.5)
            add(value - 0.5)

    def walk(node: Expr) -> None:
        if isinstance(node, Compare):
            sides = (node.left, node.right)
            for mine, other in (sides, sides[::-1]):
                if mine == path or (isinstance(mine, AgeSeconds) and path.parts == ("timing",)):
                    if isinstance(other, Literal):
                        if isinstance(mine, AgeSeconds):
                            if isinstance(other.value, (int, float)):
                                for delta in (-1, 0, 1):
                                    add(_shift_instant(clock, -(other.value + delta)))
                        else:
                            from_literal(other.value, ordered=node.op not in ("==", "!="))
            walk(node.left)
            walk(node.right)
        elif isinstance(node, BoolOp):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Not):
            walk(node.operand)
        elif isinstance(node, InList) and node.path == path:
            for item in node.items:
                add(item.value)
            first = node.items[0].value
            if isinstance(first, str):
                add(first + "_out")
            elif isinstance(first, bool):
                add(not first)
            else:
                add(first + 1)

    walk(expr)
    add(True)
    add(False)
    if path.parts[0] == "context":
        pool.append(MISSING)
    return pool


def _apply_assignment(
    tree: Dict[str, Any], assignment: Dict[Path, Any]
) -> Dict[str, Any]:
    """Return a decision value tree with the assignment applied."""
    import copy

    out = copy.deepcopy(tree)
    for path, value in assignment.items():
        if path.parts[0] != "context":
            if value is MISSING:
                raise ValueError(f"cannot remove required field {path.dotted()}")
            out[path.parts[0]] = value
            continue
        node = out.setdefault("context", {})
        for part in path.parts[1:-1]:
            node = node.setdefault(part, {})
        leaf = path.parts[-1]
        if value is MISSING:
            node.pop(leaf, None)
        else:
            node[leaf] = value
    return out


def _valid_for_field(path: Path, value: Any) -> bool:
    head = path.parts[0]
    if head == "context":
        return True
    if value is MISSING:
        return False
    if head == "timing":
        if not isinstance(value, str):
            return False
        try:
            parse_rfc3339(value)
            return True
        except ValueError:
            return False
    if not isinstance(value, str):
        return False
    if head in ("operation", "target", "decision_class") and not value:
        return False
    return True


def find_assignment(
    constraint: ConstraintDef,
    template: Dict[str, Any],
    clock: str,
    want_pass: bool,
    max_trials: int = 20000,
) -> Optional[Dict[Path, Any]]:
    """Search the constraint's own literals for field values that make it
    pass (or fail). Returns the first assignment found, or None.
    """
    import itertools

    from .decision import decision_from_value

    paths = referenced_paths(constraint.expr)
    if not paths:
        # No references: the verdict is constant; test the template as-is.
        verdict = eval_constraint(constraint, decision_from_value(template), clock)
        return {} if verdict.passed == want_pass else None

    pools = []
    for path in paths:
        pool = [v for v in _candidates_for(constraint.expr, path, clock)
                if _valid_for_field(path, v)]
        pools.append(pool or [True])

    trials = 0
    for combo in itertools.product(*pools):
        trials += 1
        if trials > max_trials:
            break
        assignment = dict(zip(paths, combo))
        try:
            candidate = decision_from_value(_apply_assignment(template, assignment))
        except Exception:
            continue
        verdict = eval_constraint(constraint, candidate, clock)
        if verdict.passed == want_pass:
            return assignment
    return None
