"""Expression language for user-supplied representing functions.

Grammar (whitespace is insignificant)::

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := unary ('^' factor)?
    unary   := '-'? primary
    primary := number | 'x' | ident '(' expr ')' | '(' expr ')'

``^`` is right-associative and a leading minus binds to the base, so
``-x^2`` means ``(-x)^2``.  Identifiers are ``log``, ``exp`` and ``sqrt``.
Numbers are decimal literals with optional fraction and exponent.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .funcs import (
    InvalidFunctionError,
    RepresentingFunction,
    default_grid,
    numerical_weight,
    validate,
)

MAX_LENGTH = 4096
MAX_NESTING = 100  # parser recursion: parentheses, calls and '^' chains
MAX_DEPTH = 400  # height of the finished tree
FUNCTIONS = {"log": math.log, "exp": math.exp, "sqrt": math.sqrt}
SINGULARITY_STEP = 1e-7


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


class DomainError(ArithmeticError):
    def __init__(self, message: str, node: "Ast"):
        self.node = node
        super().__init__(f"{message} in {pretty(node)!r}")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    operand: "Ast"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Ast"
    right: "Ast"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Ast"


Ast = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE | re.ASCII,
)


def tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.depth = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def take(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str) -> None:
        kind, text, pos = self.take()
        if text != value or kind != "op":
            what = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {what}", pos)

    def enter(self, pos: int) -> None:
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise ParseError(f"expression nested deeper than {MAX_NESTING} levels", pos)

    def expr(self) -> Ast:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Ast:
        node = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Ast:
        base = self.unary()
        if self.peek()[:2] == ("op", "^"):
            self.enter(self.take()[2])
            exponent = self.factor()
            self.depth -= 1
            return BinOp("^", base, exponent)
        return base

    def unary(self) -> Ast:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.primary())
        return self.primary()

    def primary(self) -> Ast:
        kind, text, pos = self.take()
        if kind == "num":
            value = float(text)
            if not math.isfinite(value):
                raise ParseError(f"number {text!r} out of range", pos)
            return Num(value)
        if kind == "ident":
            if text == "x":
                return Var()
            if text not in FUNCTIONS:
                raise ParseError(f"unknown identifier {text!r}", pos)
            self.expect("(")
            self.enter(pos)
            arg = self.expr()
            self.expect(")")
            self.depth -= 1
            return Call(text, arg)
        if (kind, text) == ("op", "("):
            self.enter(pos)
            node = self.expr()
            self.expect(")")
            self.depth -= 1
            return node
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {text!r}", pos)


def parse(text: str) -> Ast:
    """Parse ``text`` into an expression tree.

    Raises :class:`ParseError` carrying the character offset of the problem:
    lexical errors, unbalanced parentheses, unknown identifiers, trailing
    input, nesting deeper than :data:`MAX_NESTING` or a tree taller than
    :data:`MAX_DEPTH`.
    """
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    if len(text) > MAX_LENGTH:
        raise ParseError(f"expression longer than {MAX_LENGTH} characters", MAX_LENGTH)
    parser = _Parser(text)
    node = parser.expr()
    kind, tok, pos = parser.peek()
    if kind != "end":
        raise ParseError(f"trailing input {tok!r}", pos)
    if height(node) > MAX_DEPTH:
        raise ParseError(f"expression tree deeper than {MAX_DEPTH}", 0)
    return node


def _children(node: Ast) -> tuple:
    if isinstance(node, BinOp):
        return (node.left, node.right)
    if isinstance(node, Neg):
        return (node.operand,)
    if isinstance(node, Call):
        return (node.arg,)
    return ()


def height(node: Ast) -> int:
    """Tree height, computed without recursion."""
    best = 0
    stack = [(node, 1)]
    while stack:
        n, h = stack.pop()
        best = max(best, h)
        stack.extend((c, h + 1) for c in _children(n))
    return best


def pretty(node: Ast) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Neg):
        inner = pretty(node.operand)
        if isinstance(node.operand, (Num, Var, Call)):
            return "-" + inner
        return "-(" + inner + ")"
    if isinstance(node, BinOp):
        return f"({pretty(node.left)} {node.op} {pretty(node.right)})"
    return f"{node.name}({pretty(node.arg)})"


def _finite(value: float, node: Ast) -> float:
    if not math.isfinite(value):
        raise DomainError("non-finite result", node)
    return value


def evaluate(node: Ast, x: float) -> float:
    """Evaluate at ``x > 0`` with plain IEEE arithmetic and strict domain checks."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -evaluate(node.operand, x)
    if isinstance(node, Call):
        arg = evaluate(node.arg, x)
        if node.name == "log" and arg <= 0:
            raise DomainError("log of a non-positive value", node)
        if node.name == "sqrt" and arg < 0:
            raise DomainError("sqrt of a negative value", node)
        try:
            return _finite(FUNCTIONS[node.name](arg), node)
        except OverflowError:
            raise DomainError("overflow", node) from None
    a = evaluate(node.left, x)
    b = evaluate(node.right, x)
    op = node.op
    if op == "+":
        return _finite(a + b, node)
    if op == "-":
        return _finite(a - b, node)
    if op == "*":
        return _finite(a * b, node)
    if op == "/":
        if b == 0:
            raise DomainError("division by zero", node)
        return _finite(a / b, node)
    try:
        return _finite(math.pow(a, b), node)
    except (ValueError, ZeroDivisionError):
        raise DomainError("invalid power", node) from None
    except OverflowError:
        raise DomainError("overflow", node) from None


def eval_guarded(node: Ast, x: float) -> float:
    """Like :func:`evaluate`, but bridges a removable singularity near ``x = 1``
    by averaging ``f(1 - 1e-7)`` and ``f(1 + 1e-7)``."""
    try:
        return evaluate(node, x)
    except DomainError:
        if abs(x - 1.0) > SINGULARITY_STEP:
            raise
        return 0.5 * (evaluate(node, 1.0 - SINGULARITY_STEP) + evaluate(node, 1.0 + SINGULARITY_STEP))


def to_function(node: Ast, name: str | None = None) -> RepresentingFunction:
    """Wrap a parsed expression as a validated :class:`RepresentingFunction`.

    Admission rules: ``f(1 +- 1e-6)`` within ``1e-4`` of one, ``f(1)`` equal
    to one, positive nondecreasing values on the default grid, and a numerical
    ``f'(1)`` in ``[0, 1]``.  Passing these checks does not prove operator
    monotonicity.  Classifications of functions outside that class have no
    operator-order meaning.
    """
    name = name or pretty(node)

    def scalar(x: float) -> float:
        try:
            return eval_guarded(node, float(x))
        except DomainError:
            return math.nan

    def vectorized(x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            return np.float64(scalar(x))
        return np.array([scalar(v) for v in x.ravel()]).reshape(x.shape)

    for probe in (1.0 - 1e-6, 1.0 + 1e-6):
        try:
            value = eval_guarded(node, probe)
        except DomainError as exc:
            raise InvalidFunctionError("normalization", f"{name}: {exc}", probe) from None
        if abs(value - 1.0) > 1e-4:
            raise InvalidFunctionError(
                "normalization", f"{name}: f({probe!r}) = {value!r} is not close to 1", probe
            )
    try:
        weight = numerical_weight(lambda x: eval_guarded(node, float(x)))
    except DomainError as exc:
        raise InvalidFunctionError("weight", f"{name}: {exc}", 1.0) from None
    f = RepresentingFunction(name, (), vectorized, weight, weight_is_analytic=False)
    return validate(f, default_grid())


def parse_function(text: str) -> RepresentingFunction:
    return to_function(parse(text), name=text.strip())
