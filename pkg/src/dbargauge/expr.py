"""Coefficient expressions for problem files.

Grammar (usual precedence, ``^`` binds tightest and is right associative)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?
    atom   := number ['i'] | 'i' | name | 'exp' '(' expr ')' | '(' expr ')'

Names are ``z1..zn`` and ``zb1..zbn`` (``z``/``zb`` when n = 1).  Exponents
must be non-negative integer constants and divisors must be constants, so
every expression is a polynomial in the variables combined with ``exp``.
Constants are kept as exact complex rationals.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from gmpy2 import mpq

from .series import SeriesCoeff, exp_series, qqi_inv, qqi_mul, qqi_to_complex, to_rational

_ZERO = (mpq(0), mpq(0))
_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
                    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))")


class ExprError(ValueError):
    """Syntax or semantic error; ``column`` is 1-based."""

    def __init__(self, message, column=None, text=None):
        self.column = column
        self.text = text
        where = f" at column {column}" if column is not None else ""
        super().__init__(f"{message}{where}")


# AST -------------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    kind: str  # const | var | add | sub | mul | div | neg | pow | exp
    args: tuple = ()
    value: object = None
    column: int = 0


def _tokens(text: str):
    pos = 0
    out = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip()) + 1
            raise ExprError(f"unexpected character {text[col - 1]!r}", col, text)
        col = m.start(m.lastgroup) + 1
        out.append((m.lastgroup, m.group(m.lastgroup), col))
        pos = m.end()
    out.append(("end", "", len(text) + 1))
    return out


class _Parser:
    def __init__(self, text: str, n: int):
        self.text, self.n = text, n
        self.toks = _tokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, val, col = self.take()
        if val != op:
            raise ExprError(f"expected {op!r}, found {val or 'end of input'!r}", col, self.text)

    def parse(self):
        node = self.expr()
        kind, val, col = self.peek()
        if kind != "end":
            raise ExprError(f"unexpected {val!r}", col, self.text)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            _, op, col = self.take()
            node = Node("add" if op == "+" else "sub", (node, self.term()), column=col)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, col = self.take()
            node = Node("mul" if op == "*" else "div", (node, self.unary()), column=col)
        return node

    def unary(self):
        if self.peek()[1] in ("+", "-"):
            _, op, col = self.take()
            inner = self.unary()
            return inner if op == "+" else Node("neg", (inner,), column=col)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            _, _, col = self.take()
            return Node("pow", (base, self.unary()), column=col)
        return base

    def atom(self):
        kind, val, col = self.take()
        if kind == "num":
            q = to_rational(Fraction(val))
            if self.peek() == ("name", "i", self.peek()[2]) and self.peek()[2] == col + len(val):
                self.take()
                return Node("const", value=(mpq(0), q), column=col)
            return Node("const", value=(q, mpq(0)), column=col)
        if kind == "name":
            if val == "i":
                return Node("const", value=(mpq(0), mpq(1)), column=col)
            if val == "exp":
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Node("exp", (arg,), column=col)
            return Node("var", value=self.variable(val, col), column=col)
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExprError(f"unexpected {val or 'end of input'!r}", col, self.text)

    def variable(self, name, col):
        m = re.fullmatch(r"(zb|z)(\d*)", name)
        if not m:
            raise ExprError(f"unknown name {name!r}", col, self.text)
        conj = m.group(1) == "zb"
        if m.group(2) == "":
            if self.n != 1:
                raise ExprError(f"{name!r} needs an index when n = {self.n}", col, self.text)
            return (0, conj)
        idx = int(m.group(2))
        if not 1 <= idx <= self.n:
            raise ExprError(f"variable {name!r} out of range for n = {self.n}", col, self.text)
        return (idx - 1, conj)


def parse(text: str, n: int) -> Node:
    if not isinstance(text, str):
        raise ExprError(f"expression must be a string, got {type(text).__name__}")
    return _Parser(text, n).parse()


# evaluation ------------------------------------------------------------------

class _SeriesAlgebra:
    def __init__(self, n, acc):
        self.n, self.acc = n, acc

    def const(self, c):
        return SeriesCoeff.constant(self.n, c, self.acc)

    def var(self, idx, conj):
        return SeriesCoeff.variable(self.n, idx, conj, self.acc)

    def exp(self, u, column):
        try:
            return exp_series(u)
        except ValueError as exc:
            raise ExprError(str(exc), column) from None

    def exp_const(self, c, column):
        if c != _ZERO:
            raise ExprError("exp() of a non-zero constant is not rational", column)
        return (mpq(1), mpq(0))

    def scale(self, u, c):
        return u.scale(c)


class _PointAlgebra:
    """Numeric evaluation on complex points of shape (..., n)."""

    def __init__(self, points):
        self.points = np.asarray(points, dtype=complex)

    def const(self, c):
        return np.full(self.points.shape[:-1], qqi_to_complex(c))

    def var(self, idx, conj):
        v = self.points[..., idx]
        return np.conj(v) if conj else v.copy()

    def exp(self, u, column):
        return np.exp(u)

    def exp_const(self, c, column):
        return complex(np.exp(qqi_to_complex(c)))

    def scale(self, u, c):
        return qqi_to_complex(c) * u if isinstance(c, tuple) else c * u


def _eval(node: Node, alg):
    """Returns ('c', qqi or complex) for constant subtrees, else ('v', value)."""
    k = node.kind
    if k == "const":
        return "c", node.value
    if k == "var":
        return "v", alg.var(*node.value)
    if k == "neg":
        t, a = _eval(node.args[0], alg)
        return (t, _cneg(a)) if t == "c" else (t, -a)
    if k == "exp":
        t, a = _eval(node.args[0], alg)
        return ("c", alg.exp_const(a, node.column)) if t == "c" else ("v", alg.exp(a, node.column))
    ta, a = _eval(node.args[0], alg)
    tb, b = _eval(node.args[1], alg)
    if k == "pow":
        if tb != "c" or not _is_natural(b):
            raise ExprError("exponent must be a non-negative integer constant", node.column)
        e = int(_real(b))
        if ta == "c":
            out = (mpq(1), mpq(0)) if isinstance(a, tuple) else 1.0
            for _ in range(e):
                out = _cmul(out, a)
            return "c", out
        out = alg.const((mpq(1), mpq(0)))
        for _ in range(e):
            out = out * a
        return "v", out
    if k == "div":
        if tb != "c":
            raise ExprError("division is only allowed by constants", node.column)
        try:
            inv = qqi_inv(b) if isinstance(b, tuple) else 1.0 / b
        except ZeroDivisionError:
            raise ExprError("division by zero", node.column) from None
        return (ta, _cmul(a, inv)) if ta == "c" else (ta, alg.scale(a, inv))
    if ta == "c" and tb == "c":
        if k == "add":
            return "c", _cadd(a, b)
        if k == "sub":
            return "c", _cadd(a, _cneg(b))
        return "c", _cmul(a, b)
    if k == "mul":
        if ta == "c":
            return "v", alg.scale(b, a)
        if tb == "c":
            return "v", alg.scale(a, b)
        return "v", a * b
    a = alg.const(a) if ta == "c" else a
    b = alg.const(b) if tb == "c" else b
    return "v", (a + b if k == "add" else a - b)


def _cadd(a, b):
    if isinstance(a, tuple) and isinstance(b, tuple):
        return (a[0] + b[0], a[1] + b[1])
    return _num(a) + _num(b)


def _cmul(a, b):
    if isinstance(a, tuple) and isinstance(b, tuple):
        return qqi_mul(a, b)
    return _num(a) * _num(b)


def _cneg(a):
    return (-a[0], -a[1]) if isinstance(a, tuple) else -a


def _num(a):
    return qqi_to_complex(a) if isinstance(a, tuple) else complex(a)


def _real(a):
    return a[0] if isinstance(a, tuple) else a.real


def _is_natural(a):
    if not isinstance(a, tuple):
        return False
    re_, im = a
    return im == 0 and re_ >= 0 and re_.denominator == 1


def to_series(node: Node, n: int, acc) -> SeriesCoeff:
    """Exact series of the expression, accurate up to total degree ``acc``."""
    alg = _SeriesAlgebra(n, acc)
    t, v = _eval(node, alg)
    if t == "c":
        if not isinstance(v, tuple):
            raise ExprError("constant is not rational")
        return alg.const(v)
    return v.truncate(acc)


def evaluate(node: Node, points) -> np.ndarray:
    """Values at complex points of shape (..., n)."""
    alg = _PointAlgebra(points)
    t, v = _eval(node, alg)
    return alg.const(v) if t == "c" and isinstance(v, tuple) else (
        np.full(alg.points.shape[:-1], complex(v)) if t == "c" else v)
