"""Arithmetic expression trees: construction from derivations, evaluation,
partial simplification and the canonical fully parenthesized text form."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Mapping, Union

import numpy as np

from . import kernels

if TYPE_CHECKING:
    from .genotypes import Node

OPS = ("+", "-", "*", "/")
PROTECT_EPS = 1e-9
CLAMP = 1e30

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*\Z")


class ExprError(ValueError):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"offset {offset}: {message}")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: float
    # literal spelling, kept so grammar constants print as written
    text: str = field(default="", compare=False)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ExprError(f"non-finite constant {self.value!r}")
        if not self.text:
            object.__setattr__(self, "text", format_number(self.value))


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Expr
    right: Expr


Expr = Union[BinOp, Var, Const]


def format_number(v: float) -> str:
    return repr(float(v))


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return tok.lower().lstrip("+-") not in ("inf", "infinity", "nan")


# ---------------------------------------------------------------- from trees

def ast_from_tree(tree: Node) -> Expr:
    """Build the expression that mirrors a derivation tree's nesting.

    Parentheses are dropped; operator grouping comes from the tree, never
    from re-reading the token string.
    """
    items = _items(tree)
    if len(items) != 1 or isinstance(items[0], str):
        raise ExprError(f"derivation does not reduce to one expression: {items!r}")
    return items[0]


def _items(node: Node) -> list:
    if node.alt == -1:
        tok = node.symbol
        if tok in ("(", ")"):
            return []
        if tok in OPS:
            return [tok]
        if _is_number(tok):
            return [Const(float(tok), tok)]
        if _IDENT.match(tok):
            return [Var(tok)]
        raise ExprError(f"token {tok!r} is outside the arithmetic vocabulary")
    items: list = []
    for child in node.children:
        items.extend(_items(child))
    if (len(items) == 3 and isinstance(items[1], str)
            and not isinstance(items[0], str) and not isinstance(items[2], str)):
        return [BinOp(items[1], items[0], items[2])]
    return items


# ---------------------------------------------------------------- evaluation

def protected_op(op: str, a: float, b: float) -> float:
    if op == "+":
        v = a + b
    elif op == "-":
        v = a - b
    elif op == "*":
        v = a * b
    elif op == "/":
        v = 1.0 if abs(b) < PROTECT_EPS else a / b
    else:
        raise ExprError(f"unknown operator {op!r}")
    if v > CLAMP:
        return CLAMP
    if v < -CLAMP:
        return -CLAMP
    return v


def eval_row(e: Expr, row: Mapping[str, float]) -> float:
    """Evaluate on a single row of named values."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return float(row[e.name])
        except KeyError:
            raise ExprError(f"missing column {e.name!r}") from None
    return protected_op(e.op, eval_row(e.left, row), eval_row(e.right, row))


def variables(e: Expr) -> list[str]:
    """Variable names in first-occurrence order."""
    seen: dict[str, None] = {}
    stack = [e]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            seen.setdefault(cur.name)
        elif isinstance(cur, BinOp):
            stack.append(cur.right)
            stack.append(cur.left)
    return list(seen)


def node_count(e: Expr) -> int:
    if isinstance(e, BinOp):
        return 1 + node_count(e.left) + node_count(e.right)
    return 1


def compile_program(e: Expr, columns: Mapping[str, int]):
    """Postfix program ``(code, arg, consts)`` for the evaluation kernels."""
    code: list[int] = []
    arg: list[int] = []
    consts: list[float] = []

    def emit(n: Expr) -> None:
        if isinstance(n, BinOp):
            emit(n.left)
            emit(n.right)
            code.append(kernels.OPCODES[n.op])
            arg.append(0)
        elif isinstance(n, Var):
            try:
                idx = columns[n.name]
            except KeyError:
                raise ExprError(f"missing column {n.name!r}") from None
            code.append(kernels.VAR)
            arg.append(idx)
        else:
            code.append(kernels.CONST)
            arg.append(len(consts))
            consts.append(n.value)

    emit(e)
    return (np.asarray(code, dtype=np.int64), np.asarray(arg, dtype=np.int64),
            np.asarray(consts, dtype=np.float64))


def evaluate(e: Expr, X: np.ndarray, columns: Mapping[str, int] | list[str],
             backend: str | None = None) -> np.ndarray:
    """Vectorized evaluation over the rows of ``X`` (n_rows x n_columns)."""
    if not isinstance(columns, Mapping):
        columns = {name: i for i, name in enumerate(columns)}
    code, arg, consts = compile_program(e, columns)
    X = np.ascontiguousarray(X, dtype=np.float64)
    return kernels.eval_program(code, arg, consts, X, backend)


# ---------------------------------------------------------------- simplify

def _fold(e: Expr) -> Expr:
    if not isinstance(e, BinOp):
        return e
    left, right = _fold(e.left), _fold(e.right)
    op = e.op
    lc = left.value if isinstance(left, Const) else None
    rc = right.value if isinstance(right, Const) else None
    if lc is not None and rc is not None:
        return Const(protected_op(op, lc, rc))
    if op == "+":
        if rc == 0:
            return left
        if lc == 0:
            return right
    elif op == "-":
        if rc == 0:
            return left
        if left == right:
            return Const(0.0)
    elif op == "*":
        if rc == 1:
            return left
        if lc == 1:
            return right
        if rc == 0 or lc == 0:
            return Const(0.0)
    elif op == "/":
        if rc == 1:
            return left
        if left == right:
            return Const(1.0)
    if left is e.left and right is e.right:
        return e
    return BinOp(op, left, right)


def simplify(e: Expr) -> Expr:
    """Constant folding plus additive/multiplicative identities, to a fixed point."""
    while True:
        nxt = _fold(e)
        if nxt == e:
            return nxt
        e = nxt


# ---------------------------------------------------------------- text

def to_text(e: Expr) -> str:
    if isinstance(e, BinOp):
        return f"({to_text(e.left)} {e.op} {to_text(e.right)})"
    if isinstance(e, Var):
        return e.name
    return e.text


_ATOM = re.compile(r"-?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[A-Za-z_][A-Za-z0-9_.]*")


def parse_text(s: str) -> Expr:
    """Parse canonical expression text. Redundant parentheses are accepted."""
    pos = 0
    n = len(s)

    def skip() -> None:
        nonlocal pos
        while pos < n and s[pos].isspace():
            pos += 1

    def operand() -> Expr:
        nonlocal pos
        skip()
        if pos >= n:
            raise ParseError("unexpected end of input", pos)
        if s[pos] == "(":
            opened = pos
            pos += 1
            left = operand()
            skip()
            if pos < n and s[pos] in OPS:
                op = s[pos]
                pos += 1
                right = operand()
                skip()
                node: Expr = BinOp(op, left, right)
            else:
                node = left
            if pos >= n:
                raise ParseError("unmatched '('", opened)
            if s[pos] != ")":
                raise ParseError(f"expected ')' or operator, found {s[pos]!r}", pos)
            pos += 1
            return node
        m = _ATOM.match(s, pos)
        if not m:
            raise ParseError(f"unexpected character {s[pos]!r}", pos)
        pos = m.end()
        tok = m.group(0)
        if tok[0].isdigit() or tok[0] in "-.":
            return Const(float(tok), tok)
        return Var(tok)

    e = operand()
    skip()
    if pos != n:
        if s[pos] == ")":
            raise ParseError("unmatched ')'", pos)
        raise ParseError(f"trailing input {s[pos:pos + 10]!r}", pos)
    return e


def load_model(path: str | Path) -> Expr:
    """Read a model file: one canonical expression, ``#`` comments allowed."""
    lines = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    if not lines:
        raise ExprError(f"{path}: no expression found")
    return parse_text(" ".join(lines))
