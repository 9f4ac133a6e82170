"""A small scalar expression language with forward-mode derivatives.

Grammar (whitespace-insensitive)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" intexp)*
    intexp  := ["-"] INT | "(" ["-"] INT ")"
    atom    := NUMBER | "pi" | NAME | FUNC "(" expr ")" | "(" expr ")"
    FUNC    := sin | cos | exp | sqrt | abs

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.  Exponents
are integer literals only.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import dual as D
from .errors import DomainError, ExprSyntaxError, UnboundName, UnknownFunction

FUNCTIONS = ("sin", "cos", "exp", "sqrt", "abs")


class Expr:
    __slots__ = ()


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float

    def __post_init__(self):
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise ValueError("Num literals are finite and non-negative; wrap negatives in Neg")


@dataclass(frozen=True)
class Pi(Expr):
    pass


@dataclass(frozen=True)
class Name(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr


@dataclass(frozen=True)
class Bin(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exp: int


# -- construction helpers ---------------------------------------------------


def num(v: float) -> Expr:
    v = float(v)
    return Neg(Num(-v)) if v < 0 else Num(v)


def add(a: Expr, b: Expr) -> Expr:
    return Bin("+", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    return Bin("*", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    return Bin("-", a, b)


def call(fn: str, a: Expr) -> Expr:
    return Call(fn, a)


def total(terms) -> Expr:
    terms = list(terms)
    if not terms:
        return Num(0.0)
    out = terms[0]
    for t in terms[1:]:
        out = Bin("+", out, t)
    return out


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace named variables by expressions."""
    memo = {}

    def go(n):
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, Name):
            r = mapping.get(n.name, n)
        elif isinstance(n, Neg):
            r = Neg(go(n.arg))
        elif isinstance(n, Call):
            r = Call(n.fn, go(n.arg))
        elif isinstance(n, Bin):
            r = Bin(n.op, go(n.left), go(n.right))
        elif isinstance(n, Pow):
            r = Pow(go(n.base), n.exp)
        else:
            r = n
        memo[key] = r
        return r

    return go(e)


def names(e: Expr) -> set:
    out = set()
    stack = [e]
    while stack:
        n = stack.pop()
        if isinstance(n, Name):
            out.add(n.name)
        elif isinstance(n, (Neg, Call)):
            stack.append(n.arg)
        elif isinstance(n, Bin):
            stack.extend((n.left, n.right))
        elif isinstance(n, Pow):
            stack.append(n.base)
    return out


# -- lexer / parser ---------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


@dataclass
class _Tok:
    kind: str  # num | name | op | end
    text: str
    offset: int


def _lex(text: str):
    toks = []
    pos = 0
    raw = text.encode("utf-8")
    while True:
        m = _TOKEN.match(text, pos)
        if not m:
            rest = text[pos:]
            if rest.strip() == "":
                break
            start = pos + (len(rest) - len(rest.lstrip()))
            raise ExprSyntaxError(
                f"unexpected character {text[start]!r}", len(text[:start].encode("utf-8")), {"number", "name", "("}
            )
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), len(text[:start].encode("utf-8"))))
        pos = m.end()
    toks.append(_Tok("end", "", len(raw)))
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _lex(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect_op(self, op):
        t = self.tok
        if t.kind != "op" or t.text != op:
            raise ExprSyntaxError(f"unexpected {t.text or 'end of input'!r}", t.offset, {repr(op)})
        self.i += 1

    def parse(self):
        e = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.tok.offset, {"'+'", "'-'", "'*'", "'/'", "'^'", "end"})
        return e

    def expr(self):
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            e = Bin(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.take().text
            e = Bin(op, e, self.unary())
        return e

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        e = self.atom()
        while self.tok.kind == "op" and self.tok.text == "^":
            self.take()
            e = Pow(e, self.intexp())
        return e

    def intexp(self):
        paren = self.tok.kind == "op" and self.tok.text == "("
        if paren:
            self.take()
        sign = 1
        if self.tok.kind == "op" and self.tok.text == "-":
            self.take()
            sign = -1
        t = self.tok
        if t.kind != "num" or not re.fullmatch(r"\d+", t.text):
            raise ExprSyntaxError("exponent must be an integer literal", t.offset, {"integer"})
        self.take()
        if paren:
            self.expect_op(")")
        return sign * int(t.text)

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.take()
            return Num(float(t.text))
        if t.kind == "name":
            self.take()
            is_call = self.tok.kind == "op" and self.tok.text == "("
            if is_call:
                if t.text not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {t.text!r}", t.offset, set(FUNCTIONS))
                self.take()
                arg = self.expr()
                self.expect_op(")")
                return Call(t.text, arg)
            if t.text in FUNCTIONS:
                raise ExprSyntaxError(f"function {t.text!r} needs an argument", self.tok.offset, {"'('"})
            if t.text == "pi":
                return Pi()
            return Name(t.text)
        if t.kind == "op" and t.text == "(":
            self.take()
            e = self.expr()
            self.expect_op(")")
            return e
        raise ExprSyntaxError(
            f"unexpected {t.text or 'end of input'!r}", t.offset, {"number", "name", "'('", "'-'"}
        )


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree."""
    return _Parser(text).parse()


# -- printer ----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_string(e: Expr) -> str:
    """Print with the minimum parentheses that re-parse to the same tree."""

    def go(n, ctx):
        # ctx: precedence of the surrounding slot (0 top, 1 additive, 2 mult, 3 unary, 4 power base)
        if isinstance(n, Num):
            s = repr(float(n.value))
            if "inf" in s or "nan" in s:
                raise ValueError(s)
            return s
        if isinstance(n, Pi):
            return "pi"
        if isinstance(n, Name):
            return n.name
        if isinstance(n, Call):
            return f"{n.fn}({go(n.arg, 0)})"
        if isinstance(n, Pow):
            ex = str(n.exp) if n.exp >= 0 else f"({n.exp})"
            return f"{go(n.base, 4)}^{ex}"
        if isinstance(n, Neg):
            s = "-" + go(n.arg, 3)
            return f"({s})" if ctx >= 4 else s
        if isinstance(n, Bin):
            p = _PREC[n.op]
            left = go(n.left, p)
            right = go(n.right, p + 1)  # left-associative: equal precedence on the right needs parens
            s = f"{left} {n.op} {right}"
            return f"({s})" if p < ctx else s
        raise TypeError(type(n))

    return go(e, 0)


# -- evaluation -------------------------------------------------------------

_FN = {"sin": D.sin, "cos": D.cos, "exp": D.exp, "sqrt": D.sqrt, "abs": D.absolute}


def evaluate_with(e: Expr, bindings: Mapping[str, object]):
    """Evaluate over any number type (floats, arrays, nested duals).

    Shared subtrees (same object) are evaluated once per call.
    """
    memo = {}

    def go(n):
        key = id(n)
        if key in memo:
            return memo[key][1]
        if isinstance(n, Num):
            r = n.value
        elif isinstance(n, Pi):
            r = math.pi
        elif isinstance(n, Name):
            try:
                r = bindings[n.name]
            except KeyError:
                raise UnboundName(f"name {n.name!r} is not bound") from None
        elif isinstance(n, Neg):
            r = -go(n.arg)
        elif isinstance(n, Call):
            r = _FN[n.fn](go(n.arg))
        elif isinstance(n, Pow):
            r = D.ipow(go(n.base), n.exp)
        elif isinstance(n, Bin):
            a, b = go(n.left), go(n.right)
            if n.op == "+":
                r = a + b
            elif n.op == "-":
                r = a - b
            elif n.op == "*":
                r = a * b
            else:
                D.check_nonzero(b, "division by zero")
                r = a / b
        else:
            raise TypeError(type(n))
        memo[key] = (n, r)  # keep n alive so id() stays unique
        return r

    with np.errstate(all="ignore"):
        return go(e)


@dataclass
class Env:
    """Variables carry (value, seed vector); parameters are plain values."""

    variables: dict
    params: dict

    def __post_init__(self):
        lens = {len(np.atleast_1d(s)) for _, s in self.variables.values()}
        if len(lens) > 1:
            raise ValueError("all derivative seeds must share one length")

    @property
    def n_seeds(self):
        for _, s in self.variables.values():
            return len(np.atleast_1d(s))
        return 0


def evaluate(e: Expr, env) -> float:
    """Plain evaluation; ``env`` is an :class:`Env` or a name->value mapping."""
    if isinstance(env, Env):
        b = dict(env.params)
        b.update({k: v for k, (v, _) in env.variables.items()})
    else:
        b = env
    r = evaluate_with(e, b)
    return r


def eval_dual(e: Expr, env: Env):
    """Value and exact gradient with respect to the seeded variables."""
    k = env.n_seeds
    b = dict(env.params)
    for name, (v, s) in env.variables.items():
        s = np.atleast_1d(np.asarray(s, dtype=float))
        b[name] = D.Dual(v, tuple(float(x) for x in s))
    r = evaluate_with(e, b)
    if isinstance(r, D.Dual):
        return r.val, np.array([np.broadcast_to(g, np.shape(r.val)) for g in r.grad], dtype=float)
    return r, np.zeros((k,) + np.shape(r))


__all__ = [
    "Expr",
    "Num",
    "Pi",
    "Name",
    "Neg",
    "Call",
    "Bin",
    "Pow",
    "Env",
    "parse",
    "to_string",
    "evaluate",
    "eval_dual",
    "evaluate_with",
    "substitute",
    "names",
    "num",
    "DomainError",
]
