"""A small arithmetic-expression language for profiles and forcings.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := base ('^' factor)?
    base   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')' | '-' base

``^`` is right-associative and binds tighter than unary minus, so
``-2^2 = -4``.  Only the variables ``x`` and ``y`` and the functions below
are recognised.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "exp": (1, np.exp),
    "abs": (1, np.abs),
    "min": (None, np.minimum),
    "max": (None, np.maximum),
}
VARIABLES = ("x", "y")
MAX_DEPTH = 120


class ParseError(ValueError):
    def __init__(self, msg: str, offset: int):
        super().__init__(f"{msg} at offset {offset}")
        self.offset = offset


class EvalError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


# ---------------------------------------------------------------------------
# tokenizer and parser
# ---------------------------------------------------------------------------

_NUMBER = re.compile(rb"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(rb"[A-Za-z_][A-Za-z_0-9]*")


class _Parser:
    def __init__(self, text: str):
        self.src = text.encode("utf-8")
        self.pos = 0
        self.depth = 0
        self._tree_depth = {}
        self._keep = []

    def _node(self, node, *children):
        """Record the depth of a new tree node; deep trees are rejected so
        that evaluation and printing never hit the recursion limit."""
        d = 1 + max((self._tree_depth.get(id(c), 1) for c in children), default=0)
        if d > MAX_DEPTH:
            raise ParseError("expression nested too deeply", self.pos)
        self._tree_depth[id(node)] = d
        self._keep.append(node)
        return node

    def _skip(self):
        while self.pos < len(self.src) and self.src[self.pos:self.pos + 1] in (b" ", b"\t", b"\n", b"\r"):
            self.pos += 1

    def _peek(self) -> bytes:
        self._skip()
        return self.src[self.pos:self.pos + 1]

    def _expect(self, ch: bytes):
        if self._peek() != ch:
            raise ParseError(f"expected {ch.decode()!r}", self.pos)
        self.pos += 1

    def parse(self):
        if not self.src.strip():
            raise ParseError("empty expression", 0)
        node = self.expr()
        self._skip()
        if self.pos != len(self.src):
            raise ParseError("unexpected trailing input", self.pos)
        return node

    def expr(self):
        node = self.term()
        while self._peek() in (b"+", b"-"):
            op = self.src[self.pos:self.pos + 1].decode()
            self.pos += 1
            right = self.term()
            node = self._node(BinOp(op, node, right), node, right)
        return node

    def term(self):
        node = self.factor()
        while self._peek() in (b"*", b"/"):
            op = self.src[self.pos:self.pos + 1].decode()
            self.pos += 1
            right = self.factor()
            node = self._node(BinOp(op, node, right), node, right)
        return node

    def factor(self):
        node = self.base()
        if self._peek() == b"^":
            self.pos += 1
            right = self.factor()
            node = self._node(BinOp("^", node, right), node, right)
        return node

    def base(self):
        self.depth += 1
        if self.depth > MAX_DEPTH + 2:
            raise ParseError("expression nested too deeply", self.pos)
        try:
            return self._base()
        finally:
            self.depth -= 1

    def _base(self):
        ch = self._peek()
        start = self.pos
        if ch == b"-":
            # '-' base in the grammar; the operand is taken at factor level so
            # that '^' binds tighter than the sign
            self.pos += 1
            arg = self.factor()
            return self._node(Neg(arg), arg)
        if ch == b"(":
            self.pos += 1
            node = self.expr()
            self._expect(b")")
            return node
        m = _NUMBER.match(self.src, self.pos)
        if m:
            value = float(m.group())
            if not math.isfinite(value):
                raise ParseError("number out of range", start)
            self.pos = m.end()
            return Num(value)
        m = _IDENT.match(self.src, self.pos)
        if m:
            name = m.group().decode()
            self.pos = m.end()
            if self._peek() == b"(":
                if name not in FUNCTIONS:
                    raise ParseError(f"unknown function {name!r}", start)
                self.pos += 1
                args = [self.expr()]
                while self._peek() == b",":
                    self.pos += 1
                    args.append(self.expr())
                self._expect(b")")
                arity = FUNCTIONS[name][0]
                if arity is not None and len(args) != arity:
                    raise ParseError(f"{name} takes {arity} argument(s)", start)
                if arity is None and len(args) < 2:
                    raise ParseError(f"{name} takes at least 2 arguments", start)
                return self._node(Call(name, tuple(args)), *args)
            if name not in VARIABLES:
                raise ParseError(f"unknown identifier {name!r}", start)
            return Var(name)
        if not ch:
            raise ParseError("unexpected end of input", self.pos)
        raise ParseError(f"unexpected character {ch.decode(errors='replace')!r}", self.pos)


def parse_expr(text: str):
    if not isinstance(text, str):
        raise TypeError("expression must be a string")
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# evaluation and printing
# ---------------------------------------------------------------------------

def _power(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    if np.any((a == 0) & (b < 0)):
        raise EvalError("zero raised to a negative power")
    with np.errstate(invalid="ignore", over="ignore"):
        return np.power(a, b)


def _divide(a, b):
    b = np.asarray(b, float)
    if np.any(b == 0):
        raise EvalError("division by zero")
    return np.asarray(a, float) / b


def _eval(node, x, y):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x if node.name == "x" else y
    if isinstance(node, Neg):
        return -_eval(node.arg, x, y)
    if isinstance(node, BinOp):
        a, b = _eval(node.left, x, y), _eval(node.right, x, y)
        if node.op == "+":
            return np.add(a, b)
        if node.op == "-":
            return np.subtract(a, b)
        if node.op == "*":
            return np.multiply(a, b)
        if node.op == "/":
            return _divide(a, b)
        return _power(a, b)
    if isinstance(node, Call):
        fn = FUNCTIONS[node.name][1]
        vals = [_eval(a, x, y) for a in node.args]
        out = vals[0]
        if len(vals) == 1:
            with np.errstate(over="ignore"):
                return fn(out)
        for v in vals[1:]:
            out = fn(out, v)
        return out
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(ast, x=0.0, y=0.0):
    """Evaluate at scalar or array arguments (broadcast together)."""
    out = _eval(ast, x, y)
    if np.ndim(out) == 0 and np.ndim(x) == 0 and np.ndim(y) == 0:
        return float(out)
    return np.broadcast_to(out, np.broadcast(np.asarray(x), np.asarray(y)).shape).astype(float)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _wrap(text: str) -> str:
    return f"({text})"


def to_text(node) -> str:
    """Text with the fewest parentheses that reparses to the same tree."""
    if isinstance(node, Num):
        if not (math.isfinite(node.value) and node.value >= 0):
            raise ValueError(f"literal {node.value!r} has no textual form")
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = to_text(node.arg)
        if isinstance(node.arg, BinOp) and node.arg.op != "^":
            inner = _wrap(inner)
        return "-" + inner
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left, right = to_text(node.left), to_text(node.right)
        if node.op == "^":
            if isinstance(node.left, (BinOp, Neg)):
                left = _wrap(left)
            if isinstance(node.right, BinOp) and node.right.op != "^":
                right = _wrap(right)
        else:
            if isinstance(node.left, BinOp) and _PREC[node.left.op] < p:
                left = _wrap(left)
            if isinstance(node.right, BinOp) and _PREC[node.right.op] <= p:
                right = _wrap(right)
        return f"{left}{node.op}{right}"
    if isinstance(node, Call):
        return f"{node.name}({','.join(to_text(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


class Expression:
    """Parsed expression usable as a profile h(x) or a force component
    f(x, y).  Picklable, so it can cross process boundaries."""

    def __init__(self, text: str):
        self.text = text
        self.ast = parse_expr(text)

    def __call__(self, x, y=0.0):
        return evaluate(self.ast, x, y)

    def __repr__(self):
        return f"Expression({self.text!r})"
