"""Tiny expression language for user-defined channel walls.

Grammar (infix, one free variable ``x``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'x' | 'pi' | 'e' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := sqrt | exp | log | sin | cos | tanh | abs

Expressions are parsed into small trees that evaluate on numpy arrays and
differentiate symbolically, so user profiles come with closed-form first and
second derivatives.  ``abs`` differentiates to ``sign`` (the kink at 0 is the
user's responsibility, matching profiles like ``(1+abs(x))^0.5``).
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import ParseError

__all__ = ["parse_expression", "Expr"]


class Expr:
    """Base node: evaluates on scalars/arrays, differentiates to a new node."""

    def __call__(self, x):
        raise NotImplementedError

    def diff(self):
        raise NotImplementedError

    def simplified(self):
        return self


class Const(Expr):
    def __init__(self, value):
        self.value = float(value)

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)

    def diff(self):
        return Const(0.0)

    def __repr__(self):
        return f"{self.value:g}"


class Var(Expr):
    def __call__(self, x):
        return np.asarray(x, dtype=float) + 0.0

    def diff(self):
        return Const(1.0)

    def __repr__(self):
        return "x"


class Binary(Expr):
    op = "?"

    def __init__(self, a, b):
        self.a = a
        self.b = b

    def __repr__(self):
        return f"({self.a!r} {self.op} {self.b!r})"


class Add(Binary):
    op = "+"

    def __call__(self, x):
        return self.a(x) + self.b(x)

    def diff(self):
        return Add(self.a.diff(), self.b.diff())

    def simplified(self):
        a, b = self.a.simplified(), self.b.simplified()
        if isinstance(a, Const) and isinstance(b, Const):
            return Const(a.value + b.value)
        if isinstance(a, Const) and a.value == 0.0:
            return b
        if isinstance(b, Const) and b.value == 0.0:
            return a
        return Add(a, b)


class Sub(Binary):
    op = "-"

    def __call__(self, x):
        return self.a(x) - self.b(x)

    def diff(self):
        return Sub(self.a.diff(), self.b.diff())

    def simplified(self):
        a, b = self.a.simplified(), self.b.simplified()
        if isinstance(a, Const) and isinstance(b, Const):
            return Const(a.value - b.value)
        if isinstance(b, Const) and b.value == 0.0:
            return a
        return Sub(a, b)


class Mul(Binary):
    op = "*"

    def __call__(self, x):
        return self.a(x) * self.b(x)

    def diff(self):
        return Add(Mul(self.a.diff(), self.b), Mul(self.a, self.b.diff()))

    def simplified(self):
        a, b = self.a.simplified(), self.b.simplified()
        if isinstance(a, Const) and isinstance(b, Const):
            return Const(a.value * b.value)
        for u, v in ((a, b), (b, a)):
            if isinstance(u, Const):
                if u.value == 0.0:
                    return Const(0.0)
                if u.value == 1.0:
                    return v
        return Mul(a, b)


class Div(Binary):
    op = "/"

    def __call__(self, x):
        return self.a(x) / self.b(x)

    def diff(self):
        return Div(
            Sub(Mul(self.a.diff(), self.b), Mul(self.a, self.b.diff())),
            Mul(self.b, self.b),
        )

    def simplified(self):
        a, b = self.a.simplified(), self.b.simplified()
        if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
            return Const(a.value / b.value)
        if isinstance(a, Const) and a.value == 0.0:
            return Const(0.0)
        if isinstance(b, Const) and b.value == 1.0:
            return a
        return Div(a, b)


class Pow(Binary):
    """a ^ b with b restricted to a constant exponent (keeps diff simple)."""

    op = "^"

    def __call__(self, x):
        return self.a(x) ** self.b.value

    def diff(self):
        # d/dx a^c = c * a^(c-1) * a'
        c = self.b.value
        return Mul(Mul(Const(c), Pow(self.a, Const(c - 1.0))), self.a.diff())

    def simplified(self):
        a, b = self.a.simplified(), self.b.simplified()
        if isinstance(a, Const):
            return Const(a.value ** b.value)
        if b.value == 1.0:
            return a
        if b.value == 0.0:
            return Const(1.0)
        return Pow(a, b)


class Func(Expr):
    _TABLE = {
        "sqrt": (np.sqrt, lambda a: Div(Const(0.5), Func("sqrt", a))),
        "exp": (np.exp, lambda a: Func("exp", a)),
        "log": (np.log, lambda a: Div(Const(1.0), a)),
        "sin": (np.sin, lambda a: Func("cos", a)),
        "cos": (np.cos, lambda a: Mul(Const(-1.0), Func("sin", a))),
        "tanh": (np.tanh, lambda a: Sub(Const(1.0), Mul(Func("tanh", a), Func("tanh", a)))),
        "abs": (np.abs, lambda a: Func("_sign", a)),
        "_sign": (np.sign, lambda a: Const(0.0)),
    }

    def __init__(self, name, arg):
        self.name = name
        self.arg = arg

    def __call__(self, x):
        return self._TABLE[self.name][0](self.arg(x))

    def diff(self):
        outer = self._TABLE[self.name][1](self.arg)
        return Mul(outer, self.arg.diff())

    def simplified(self):
        arg = self.arg.simplified()
        if isinstance(arg, Const):
            return Const(float(self._TABLE[self.name][0](arg.value)))
        return Func(self.name, arg)

    def __repr__(self):
        return f"{self.name}({self.arg!r})"


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)

_FUNCS = ("sqrt", "exp", "log", "sin", "cos", "tanh", "abs")
_CONSTS = {"pi": math.pi, "e": math.e}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ParseError(f"unexpected character {rest[0]!r} in expression {text!r}")
        if m.lastgroup == "num":
            tokens.append(("num", float(m.group("num"))))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name")))
        else:
            op = m.group("op")
            tokens.append(("op", "^" if op == "**" else op))
        pos = m.end()
    tokens.append(("end", None))
    return tokens


class _Parser:
    def __init__(self, tokens, text):
        self.tokens = tokens
        self.text = text
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val = self.next()
        if kind != "op" or val != op:
            raise ParseError(f"expected {op!r} in expression {self.text!r}")

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise ParseError(f"trailing tokens in expression {self.text!r}")
        return node.simplified()

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.next()
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.next()
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.next()
            return Sub(Const(0.0), self.unary())
        if self.peek() == ("op", "+"):
            self.next()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.next()
            exponent = self.unary().simplified()
            if not isinstance(exponent, Const):
                raise ParseError(
                    f"exponent must be a constant in expression {self.text!r}"
                )
            return Pow(base, exponent)
        return base

    def atom(self):
        kind, val = self.next()
        if kind == "num":
            return Const(val)
        if kind == "name":
            if val == "x":
                return Var()
            if val in _CONSTS:
                return Const(_CONSTS[val])
            if val in _FUNCS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Func(val, arg)
            raise ParseError(f"unknown name {val!r} in expression {self.text!r}")
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected token in expression {self.text!r}")


def parse_expression(text):
    """Parse ``text`` into an :class:`Expr` with symbolic derivatives."""
    if not isinstance(text, str) or not text.strip():
        raise ParseError("empty expression")
    return _Parser(_tokenize(text), text).parse()
