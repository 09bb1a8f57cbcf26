"""Kernel DSL: a small arithmetic language over coordinates ``x1 ... xd``.

The grammar is the usual precedence-climbing one::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom (('^' | '**') unary)?
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names are coordinates ``x<k>``, the regulator ``eps``, the constants ``pi``
and ``I``. Functions: ``abs log exp sqrt pow sign heaviside sin cos``.

Parsing produces a sympy expression, which serves as the expression tree and
provides symbolic differentiation. Decimal literals are kept exact.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

__all__ = [
    "DSLSyntaxError",
    "parse_kernel_dsl",
    "coordinate_symbols",
    "EPS",
    "compile_expr",
    "off_locus",
]

EPS = sp.Symbol("eps", positive=True)

_FUNCS = {
    "abs": (1, sp.Abs),
    "log": (1, sp.log),
    "exp": (1, sp.exp),
    "sqrt": (1, sp.sqrt),
    "sign": (1, sp.sign),
    "heaviside": (1, lambda a: sp.Heaviside(a, sp.Rational(1, 2))),
    "sin": (1, sp.sin),
    "cos": (1, sp.cos),
    "pow": (2, lambda a, b: sp.Pow(a, b)),
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


class DSLSyntaxError(ValueError):
    """Malformed kernel text. Carries the 0-based offset and 1-based line/column."""

    def __init__(self, message: str, text: str, offset: int):
        self.offset = offset
        self.line = text.count("\n", 0, offset) + 1
        self.column = offset - (text.rfind("\n", 0, offset) + 1) + 1
        super().__init__(f"{message} at line {self.line}, column {self.column}")


@dataclass
class _Tok:
    kind: str
    value: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise DSLSyntaxError(f"unexpected character {text[start]!r}", text, start)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


@lru_cache(maxsize=None)
def coordinate_symbols(d: int) -> tuple[sp.Symbol, ...]:
    return tuple(sp.Symbol(f"x{i + 1}", real=True) for i in range(d))


class _Parser:
    def __init__(self, text: str, dim: int | None):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.dim = dim

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self, value: str | None = None) -> _Tok:
        tok = self.toks[self.i]
        if value is not None and tok.value != value:
            found = "end of input" if tok.kind == "end" else repr(tok.value)
            raise DSLSyntaxError(f"expected {value!r}, found {found}", self.text, tok.pos)
        self.i += 1
        return tok

    def parse(self) -> sp.Expr:
        expr = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise DSLSyntaxError(f"unexpected {tok.value!r}", self.text, tok.pos)
        return expr

    def expr(self) -> sp.Expr:
        left = self.term()
        while self.peek().value in ("+", "-"):
            op = self.take().value
            right = self.term()
            left = left + right if op == "+" else left - right
        return left

    def term(self) -> sp.Expr:
        left = self.unary()
        while self.peek().value in ("*", "/"):
            op = self.take().value
            right = self.unary()
            left = left * right if op == "*" else left / right
        return left

    def unary(self) -> sp.Expr:
        if self.peek().value in ("+", "-"):
            op = self.take().value
            operand = self.unary()
            return -operand if op == "-" else operand
        return self.power()

    def power(self) -> sp.Expr:
        base = self.atom()
        if self.peek().value in ("^", "**"):
            self.take()
            return sp.Pow(base, self.unary())
        return base

    def atom(self) -> sp.Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.take()
            return sp.Rational(tok.value)
        if tok.kind == "name":
            self.take()
            if self.peek().value == "(":
                return self.call(tok)
            return self.name(tok)
        if tok.value == "(":
            self.take()
            inner = self.expr()
            self.take(")")
            return inner
        found = "end of input" if tok.kind == "end" else repr(tok.value)
        raise DSLSyntaxError(f"unexpected {found}", self.text, tok.pos)

    def call(self, tok: _Tok) -> sp.Expr:
        if tok.value not in _FUNCS:
            raise DSLSyntaxError(f"unknown function {tok.value!r}", self.text, tok.pos)
        arity, fn = _FUNCS[tok.value]
        self.take("(")
        args = [self.expr()]
        while self.peek().value == ",":
            self.take()
            args.append(self.expr())
        close = self.peek()
        self.take(")")
        if len(args) != arity:
            raise DSLSyntaxError(
                f"{tok.value} takes {arity} argument(s), got {len(args)}", self.text, close.pos
            )
        return fn(*args)

    def name(self, tok: _Tok) -> sp.Expr:
        v = tok.value
        if v == "pi":
            return sp.pi
        if v == "I":
            return sp.I
        if v == "eps":
            return EPS
        m = re.fullmatch(r"x([1-9]\d*)", v)
        if m is None:
            raise DSLSyntaxError(f"unknown name {v!r}", self.text, tok.pos)
        k = int(m.group(1))
        if self.dim is not None and k > self.dim:
            raise DSLSyntaxError(f"coordinate {v} exceeds dimension {self.dim}", self.text, tok.pos)
        return sp.Symbol(v, real=True)


def parse_kernel_dsl(text: str, dim: int | None = None) -> sp.Expr:
    """Parse kernel text into a sympy expression over ``x1 ... xd``.

    >>> parse_kernel_dsl("pow(abs(x1), -0.5)")
    1/sqrt(Abs(x1))
    """
    if not text or not text.strip():
        raise DSLSyntaxError("empty kernel text", text or "", 0)
    return _Parser(text, dim).parse()


def off_locus(expr: sp.Expr) -> sp.Expr:
    """Drop distributional remnants that vanish away from the singular locus."""
    return expr.replace(sp.DiracDelta, lambda *a: sp.S.Zero)


_MODULES = [{"Heaviside": lambda x, h=0.5: np.heaviside(x, h)}, "numpy"]


@lru_cache(maxsize=4096)
def _compile(expr: sp.Expr, nvars: int):
    syms = coordinate_symbols(nvars)
    fn = sp.lambdify(syms + (EPS,), off_locus(expr), modules=_MODULES)
    return fn


def compile_expr(expr: sp.Expr, nvars: int, offset: int = 0):
    """Vectorized evaluator ``f(X, eps=None)`` with ``X`` of shape ``(nvars, N)``.

    ``offset`` renames ``x{offset+1} ... x{offset+nvars}`` to ``x1 ... xnvars``
    before compiling, which is how tensor blocks evaluate their own variables.
    """
    if offset:
        src = coordinate_symbols(offset + nvars)[offset:]
        expr = expr.xreplace(dict(zip(src, coordinate_symbols(nvars))))
    fn = _compile(expr, nvars)

    def evaluate(X, eps=None):
        X = np.atleast_2d(X)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = fn(*X, eps if eps is not None else np.nan)
        return np.broadcast_to(np.asarray(out), X.shape[1:]).copy()

    return evaluate
