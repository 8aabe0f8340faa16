"""Scalar expression language over chart coordinates.

Grammar (standard precedence, ``^`` right-associative, ``**`` accepted as an
alias for ``^``, no implicit multiplication)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := ('-' | '+') unary | power
    power := atom ('^' unary)?
    atom  := number | coord | func '(' expr ')' | '(' expr ')'

Exponents must be constant expressions.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import jet as jm
from .errors import DimensionMismatch, ExprSyntaxError, UnknownSymbol

FUNCTION_NAMES = tuple(jm.FUNCTIONS)

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


class Expr:
    """Base class of expression nodes. Nodes are immutable and hashable."""

    prec = _PREC_ATOM

    # evaluation -------------------------------------------------------------
    def evaluate(self, args: Sequence):
        """Evaluate over a sequence of scalars (floats or Jets)."""
        raise NotImplementedError

    def __call__(self, point) -> float:
        return float(self.evaluate(_check_point(self, point)))

    def jet(self, point) -> jm.Jet:
        p = _check_point(self, point)
        n = len(p)
        args = [jm.Jet.variable(v, k, n) for k, v in enumerate(p)]
        out = self.evaluate(args)
        if not isinstance(out, jm.Jet):
            out = jm.Jet.constant(out, n)
        return out

    # structure --------------------------------------------------------------
    def max_index(self) -> int:
        """Largest coordinate index referenced, -1 for constants."""
        return max((c.max_index() for c in self.children()), default=-1)

    def children(self) -> tuple:
        return ()

    def is_constant(self) -> bool:
        return self.max_index() < 0

    def diff(self, k: int) -> "Expr":
        raise NotImplementedError

    def subs(self, exprs: Sequence["Expr"]) -> "Expr":
        """Substitute coordinate i by exprs[i]."""
        raise NotImplementedError

    def to_string(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_string()

    def _wrap(self, prec: int) -> str:
        s = self.to_string()
        return f"({s})" if self.prec < prec else s


def _check_point(e: Expr, point):
    p = [float(v) for v in np.asarray(point, dtype=float).ravel()]
    if e.max_index() >= len(p):
        raise DimensionMismatch(
            f"expression uses coordinate #{e.max_index()} but point has dimension {len(p)}"
        )
    return p


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v)) if v != 0 or math.copysign(1.0, v) > 0 else "-0"
    return repr(v)


@dataclass(frozen=True, eq=True)
class Const(Expr):
    value: float

    @property
    def prec(self):
        return _PREC_UNARY if math.copysign(1.0, self.value) < 0 else _PREC_ATOM

    def evaluate(self, args):
        return self.value

    def diff(self, k):
        return ZERO

    def subs(self, exprs):
        return self

    def to_string(self):
        return _fmt_number(self.value)


@dataclass(frozen=True, eq=True)
class Var(Expr):
    index: int
    name: str

    def evaluate(self, args):
        return args[self.index]

    def max_index(self):
        return self.index

    def diff(self, k):
        return ONE if k == self.index else ZERO

    def subs(self, exprs):
        return exprs[self.index]

    def to_string(self):
        return self.name


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr
    prec = _PREC_UNARY

    def children(self):
        return (self.arg,)

    def evaluate(self, args):
        return -self.arg.evaluate(args)

    def diff(self, k):
        return neg(self.arg.diff(k))

    def subs(self, exprs):
        return neg(self.arg.subs(exprs))

    def to_string(self):
        return "-" + self.arg._wrap(_PREC_UNARY)


@dataclass(frozen=True, eq=True)
class Func(Expr):
    name: str
    arg: Expr

    def children(self):
        return (self.arg,)

    def evaluate(self, args):
        return jm.FUNCTIONS[self.name](self.arg.evaluate(args))

    def diff(self, k):
        a = self.arg
        da = a.diff(k)
        if _is_zero(da):
            return ZERO
        if self.name == "sin":
            outer = Func("cos", a)
        elif self.name == "cos":
            outer = neg(Func("sin", a))
        elif self.name == "exp":
            outer = self
        elif self.name == "log":
            return div(da, a)
        elif self.name == "sqrt":
            return div(da, mul(Const(2.0), self))
        elif self.name == "abs":
            outer = div(a, self)
        else:  # pragma: no cover - guarded by the parser
            raise ValueError(self.name)
        return mul(outer, da)

    def subs(self, exprs):
        return Func(self.name, self.arg.subs(exprs))

    def to_string(self):
        return f"{self.name}({self.arg.to_string()})"


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    @property
    def prec(self):
        return _PREC_ADD if self.op in "+-" else _PREC_MUL

    def children(self):
        return (self.left, self.right)

    def evaluate(self, args):
        a = self.left.evaluate(args)
        b = self.right.evaluate(args)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if not isinstance(b, jm.Jet) and b == 0:
            raise jm.DomainError("division by zero")
        return a / b

    def diff(self, k):
        a, b = self.left, self.right
        da, db = a.diff(k), b.diff(k)
        if self.op == "+":
            return add(da, db)
        if self.op == "-":
            return sub(da, db)
        if self.op == "*":
            return add(mul(da, b), mul(a, db))
        # (a/b)' = a'/b - a b'/b^2
        return sub(div(da, b), div(mul(a, db), Pow(b, Const(2.0))))

    def subs(self, exprs):
        return _BUILD[self.op](self.left.subs(exprs), self.right.subs(exprs))

    def to_string(self):
        p = self.prec
        return f"{self.left._wrap(p)} {self.op} {self.right._wrap(p + 1)}"


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: Expr
    prec = _PREC_POW

    def children(self):
        return (self.base, self.exponent)

    @property
    def power(self) -> float:
        return float(self.exponent.evaluate(()))

    def evaluate(self, args):
        return jm.power(self.base.evaluate(args), self.power)

    def diff(self, k):
        db = self.base.diff(k)
        if _is_zero(db):
            return ZERO
        e = self.power
        if e == 0.0:
            return ZERO
        lower = self.base if e == 2.0 else Pow(self.base, Const(e - 1.0))
        return mul(mul(Const(e), lower), db)

    def subs(self, exprs):
        return Pow(self.base.subs(exprs), self.exponent)

    def to_string(self):
        return f"{self.base._wrap(_PREC_ATOM)}^{self.exponent._wrap(_PREC_UNARY)}"


ZERO = Const(0.0)
ONE = Const(1.0)


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


def _is_one(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 1.0


# light constant folding used by diff --------------------------------------

def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_zero(b):
        return a
    if _is_zero(a):
        return neg(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_zero(a) or _is_zero(b):
        return ZERO
    if _is_one(a):
        return b
    if _is_one(b):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_zero(a):
        return ZERO
    if _is_one(b):
        return a
    return BinOp("/", a, b)


_BUILD = {"+": add, "-": sub, "*": mul, "/": div}


def const(v: float) -> Expr:
    return Const(float(v))


# tokenizer and parser --------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(pos, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        tok = m.group(kind)
        start = m.start(kind)
        if kind == "op" and tok == "**":
            tok = "^"
        tokens.append((kind, tok, start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, coords: Sequence[str]):
        self.text = text
        self.coords = {name: i for i, name in enumerate(coords)}
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op: str):
        kind, tok, pos = self.next()
        if tok != op or kind != "op":
            found = "end of input" if kind == "end" else repr(tok)
            raise ExprSyntaxError(pos, f"expected {op!r}, found {found}")

    def parse(self) -> Expr:
        e = self.expr()
        kind, tok, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(pos, f"unexpected {tok!r}")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while True:
            kind, tok, _ = self.peek()
            if kind == "op" and tok in "+-" and tok:
                self.next()
                left = BinOp(tok, left, self.term())
            else:
                return left

    def term(self) -> Expr:
        left = self.unary()
        while True:
            kind, tok, _ = self.peek()
            if kind == "op" and tok in ("*", "/"):
                self.next()
                left = BinOp(tok, left, self.unary())
            else:
                return left

    def unary(self) -> Expr:
        kind, tok, _ = self.peek()
        if kind == "op" and tok == "-":
            self.next()
            inner = self.unary()
            return Const(-inner.value) if isinstance(inner, Const) else Neg(inner)
        if kind == "op" and tok == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, tok, pos = self.peek()
        if kind == "op" and tok == "^":
            self.next()
            epos = self.peek()[2]
            exponent = self.unary()
            if not exponent.is_constant():
                raise ExprSyntaxError(epos, "exponent must be a constant expression")
            try:
                val = float(exponent.evaluate(()))
            except Exception as exc:  # noqa: BLE001 - report as syntax problem
                raise ExprSyntaxError(epos, f"cannot evaluate exponent: {exc}") from exc
            if not math.isfinite(val):
                raise ExprSyntaxError(epos, "exponent is not finite")
            return Pow(base, exponent)
        return base

    def atom(self) -> Expr:
        kind, tok, pos = self.next()
        if kind == "num":
            return Const(float(tok))
        if kind == "name":
            nkind, ntok, npos = self.peek()
            if nkind == "op" and ntok == "(":
                if tok not in jm.FUNCTIONS:
                    raise UnknownSymbol(tok, pos)
                self.next()
                arg = self.expr()
                kind2, tok2, pos2 = self.peek()
                if kind2 == "op" and tok2 == ",":
                    raise ExprSyntaxError(pos2, f"{tok}() takes exactly one argument")
                self.expect(")")
                return Func(tok, arg)
            if tok in jm.FUNCTIONS:
                raise ExprSyntaxError(npos, f"function {tok!r} must be called with one argument")
            if tok not in self.coords:
                raise UnknownSymbol(tok, pos)
            return Var(self.coords[tok], tok)
        if kind == "op" and tok == "(":
            e = self.expr()
            self.expect(")")
            return e
        found = "end of input" if kind == "end" else repr(tok)
        raise ExprSyntaxError(pos, f"unexpected {found}")


def parse_expr(text: str, coords: Sequence[str]) -> Expr:
    """Parse ``text`` into an expression tree over the named coordinates."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError(0, "empty expression")
    dup = {c for c in coords if list(coords).count(c) > 1}
    if dup:
        raise ValueError(f"duplicate coordinate names {sorted(dup)}")
    return _Parser(text, list(coords)).parse()


def eval_jet(e: Expr, point) -> jm.Jet:
    """Value and exact gradient of ``e`` at ``point``."""
    return e.jet(point)


def to_string(e: Expr) -> str:
    return e.to_string()
