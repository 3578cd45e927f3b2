"""Rational expression trees over variables ``u1 .. ud``.

Expressions are immutable trees built from variables, real constants,
``+ - * /``, integer powers and unary negation. The grammar is closed under
differentiation, so every partial derivative of an expression is again an
expression and no numerical differentiation error enters downstream.

Variable indices are 1-based, matching the printed names ``u1``, ``u2`` ...;
evaluation takes a 0-based sequence, so ``u[0]`` is the value of ``u1``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Add", "Sub", "Mul", "Div", "Pow", "Neg",
    "ExprSyntaxError", "EvalError",
    "parse", "evaluate", "diff", "to_string", "substitute", "variables",
    "compile_exprs", "const", "var",
]


class ExprSyntaxError(ValueError):
    """Malformed expression text. ``pos`` is the 0-based character offset."""

    def __init__(self, message: str, pos: int, text: str = ""):
        super().__init__(f"{message} at position {pos}" + (f" in {text!r}" if text else ""))
        self.pos = pos
        self.text = text


class EvalError(ArithmeticError):
    """Evaluation hit a division by zero (or a zero base with negative power)."""


class Expr:
    """Base node. Supports arithmetic operators for building trees in code."""

    __slots__ = ()

    def __add__(self, other):
        return Add(self, _coerce(other))

    def __radd__(self, other):
        return Add(_coerce(other), self)

    def __sub__(self, other):
        return Sub(self, _coerce(other))

    def __rsub__(self, other):
        return Sub(_coerce(other), self)

    def __mul__(self, other):
        return Mul(self, _coerce(other))

    def __rmul__(self, other):
        return Mul(_coerce(other), self)

    def __truediv__(self, other):
        return Div(self, _coerce(other))

    def __rtruediv__(self, other):
        return Div(_coerce(other), self)

    def __pow__(self, k):
        if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
            raise TypeError("only integer exponents are supported")
        return Pow(self, int(k))

    def __neg__(self):
        return Neg(self)

    def __str__(self):
        return to_string(self)


def _coerce(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool):
        return Const(float(x))
    raise TypeError(f"cannot use {type(x).__name__} in an expression")


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 1-based

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("variable indices start at 1")


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


def const(value: float) -> Const:
    return Const(float(value))


def var(index: int) -> Var:
    return Var(index)


ZERO = Const(0.0)
ONE = Const(1.0)


# {{{ smart constructors (light constant folding, value preserving)

def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def _add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return _neg(b)
    return Sub(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    # x*0 is folded to 0 only because derivative trees never hold inf/nan constants
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Mul(a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 1.0):
        return a
    return Div(a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def _pow(a: Expr, k: int) -> Expr:
    if k == 1:
        return a
    if k == 0:
        return ONE
    return Pow(a, k)

# }}}


# {{{ differentiation

def diff(e: Expr, j: int) -> Expr:
    """Exact partial derivative of ``e`` with respect to variable ``u_j`` (1-based)."""
    if j < 1:
        raise ValueError("variable indices start at 1")
    return _diff(e, j)


def _diff(e: Expr, j: int) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == j else ZERO
    if isinstance(e, Add):
        return _add(_diff(e.left, j), _diff(e.right, j))
    if isinstance(e, Sub):
        return _sub(_diff(e.left, j), _diff(e.right, j))
    if isinstance(e, Mul):
        return _add(_mul(_diff(e.left, j), e.right), _mul(e.left, _diff(e.right, j)))
    if isinstance(e, Div):
        da, db = _diff(e.left, j), _diff(e.right, j)
        if _is_const(db, 0.0):
            return _div(da, e.right)
        num = _sub(_mul(da, e.right), _mul(e.left, db))
        return _div(num, _pow(e.right, 2))
    if isinstance(e, Pow):
        db = _diff(e.base, j)
        if e.exponent == 0 or _is_const(db, 0.0):
            return ZERO
        return _mul(_mul(Const(float(e.exponent)), _pow(e.base, e.exponent - 1)), db)
    if isinstance(e, Neg):
        return _neg(_diff(e.operand, j))
    raise TypeError(f"unknown node {type(e).__name__}")

# }}}


# {{{ evaluation

def evaluate(e: Expr, u) -> float:
    """Evaluate ``e`` at the point ``u`` (``u[0]`` is ``u1``).

    Entries of ``u`` may also be numpy arrays of a common shape, in which case
    the result is an array. Division by zero raises :class:`EvalError`.
    """
    try:
        with np.errstate(divide="raise", invalid="raise"):
            return _eval(e, u)
    except (ZeroDivisionError, FloatingPointError) as exc:
        raise EvalError(f"division by zero while evaluating {to_string(e)}") from exc
    except IndexError as exc:
        raise ValueError(f"point has {len(u)} entries but expression uses "
                         f"u{max(variables(e))}") from exc


def _eval(e: Expr, u):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return u[e.index - 1]
    if isinstance(e, Add):
        return _eval(e.left, u) + _eval(e.right, u)
    if isinstance(e, Sub):
        return _eval(e.left, u) - _eval(e.right, u)
    if isinstance(e, Mul):
        return _eval(e.left, u) * _eval(e.right, u)
    if isinstance(e, Div):
        den = _eval(e.right, u)
        if np.ndim(den) == 0 and den == 0:
            raise ZeroDivisionError
        return _eval(e.left, u) / den
    if isinstance(e, Pow):
        base = _eval(e.base, u)
        if e.exponent < 0:
            if np.ndim(base) == 0 and base == 0:
                raise ZeroDivisionError
            return 1.0 / base ** (-e.exponent)
        return base ** e.exponent
    if isinstance(e, Neg):
        return -_eval(e.operand, u)
    raise TypeError(f"unknown node {type(e).__name__}")


def _source(e: Expr, names: Sequence[str]) -> str:
    if isinstance(e, Const):
        return repr(e.value) if e.value >= 0 else f"({e.value!r})"
    if isinstance(e, Var):
        return names[e.index - 1]
    if isinstance(e, Add):
        return f"({_source(e.left, names)} + {_source(e.right, names)})"
    if isinstance(e, Sub):
        return f"({_source(e.left, names)} - {_source(e.right, names)})"
    if isinstance(e, Mul):
        return f"({_source(e.left, names)} * {_source(e.right, names)})"
    if isinstance(e, Div):
        return f"({_source(e.left, names)} / {_source(e.right, names)})"
    if isinstance(e, Pow):
        if e.exponent < 0:
            return f"(1.0 / {_source(e.base, names)} ** {-e.exponent})"
        return f"({_source(e.base, names)} ** {e.exponent})"
    if isinstance(e, Neg):
        return f"(-{_source(e.operand, names)})"
    raise TypeError(f"unknown node {type(e).__name__}")


def compile_exprs(exprs: Iterable[Expr], d: int) -> Callable[[Sequence], list]:
    """Generate one Python function evaluating every expression in ``exprs``.

    The returned callable maps a length-``d`` sequence (floats or equally
    shaped arrays) to a list of values. It is the fast path used by the
    solvers; division by zero raises :class:`EvalError` as with
    :func:`evaluate`.
    """
    exprs = list(exprs)
    for e in exprs:
        used = variables(e)
        if used and max(used) > d:
            raise ValueError(f"expression uses u{max(used)} but d={d}")
    names = [f"_u{j}" for j in range(1, d + 1)]
    body = ", ".join(_source(e, names) for e in exprs)
    unpack = "".join(f"    {nm} = u[{j}]\n" for j, nm in enumerate(names))
    src = f"def _compiled(u):\n{unpack}    return [{body}]\n"
    scope: dict = {}
    exec(compile(src, "<jordanflow.expr>", "exec"), scope)
    raw = scope["_compiled"]

    def call(u):
        try:
            with np.errstate(divide="raise", invalid="raise"):
                return raw(u)
        except (ZeroDivisionError, FloatingPointError) as exc:
            raise EvalError("division by zero in compiled expression") from exc

    return call

# }}}


def variables(e: Expr) -> set[int]:
    """Indices of variables appearing in ``e``."""
    out: set[int] = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            out.add(node.index)
        elif isinstance(node, (Add, Sub, Mul, Div)):
            stack.extend((node.left, node.right))
        elif isinstance(node, Pow):
            stack.append(node.base)
        elif isinstance(node, Neg):
            stack.append(node.operand)
    return out


def substitute(e: Expr, mapping: dict[int, Expr | float]) -> Expr:
    """Replace variables by expressions or numbers (keys are 1-based indices)."""
    mapping = {k: _coerce(v) for k, v in mapping.items()}

    def sub(node: Expr) -> Expr:
        if isinstance(node, Var):
            return mapping.get(node.index, node)
        if isinstance(node, Const):
            return node
        if isinstance(node, (Add, Sub, Mul, Div)):
            return type(node)(sub(node.left), sub(node.right))
        if isinstance(node, Pow):
            return Pow(sub(node.base), node.exponent)
        if isinstance(node, Neg):
            return Neg(sub(node.operand))
        raise TypeError(f"unknown node {type(node).__name__}")

    return sub(e)


# {{{ printing

def to_string(e: Expr, names: Sequence[str] | None = None) -> str:
    """Fully parenthesized canonical form; ``parse`` reads it back."""
    def name(j):
        return names[j - 1] if names is not None else f"u{j}"

    def pr(node: Expr) -> str:
        if isinstance(node, Const):
            text = repr(node.value)
            if not math.isfinite(node.value):
                raise ValueError("non-finite constants cannot be printed")
            return text if node.value >= 0 and not text.startswith("-") else f"({text})"
        if isinstance(node, Var):
            return name(node.index)
        if isinstance(node, Add):
            return f"({pr(node.left)} + {pr(node.right)})"
        if isinstance(node, Sub):
            return f"({pr(node.left)} - {pr(node.right)})"
        if isinstance(node, Mul):
            return f"({pr(node.left)} * {pr(node.right)})"
        if isinstance(node, Div):
            return f"({pr(node.left)} / {pr(node.right)})"
        if isinstance(node, Pow):
            k = node.exponent
            return f"({pr(node.base)} ^ {k if k >= 0 else f'({k})'})"
        if isinstance(node, Neg):
            inner = pr(node.operand)
            if isinstance(node.operand, Const):
                inner = f"({inner})"
            return f"(-{inner})"
        raise TypeError(f"unknown node {type(node).__name__}")

    return pr(e)

# }}}


# {{{ parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    # expr   := term (('+'|'-') term)*
    # term   := unary (('*'|'/') unary)*
    # unary  := '-' unary | '+' unary | power
    # power  := atom ('^' intexp)?
    # intexp := ['-'|'+'] INT | '(' ['-'|'+'] INT ')'
    def __init__(self, text, lookup):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.lookup = lookup

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value:
            raise ExprSyntaxError(f"expected {value!r}, found {text or 'end of input'!r}",
                                  pos, self.text)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos, self.text)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            kind, text, _ = self.peek()
            # "-2.5" is a negative literal; "-2^2" and "-(2)" keep an explicit negation
            if kind == "num" and self.tokens[self.i + 1][1] != "^":
                self.take()
                return Const(-float(text))
            return Neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return Pow(base, self.intexp())
        return base

    def intexp(self) -> int:
        paren = self.peek()[1] == "("
        if paren:
            self.take()
        sign = 1
        if self.peek()[1] in ("-", "+"):
            sign = -1 if self.take()[1] == "-" else 1
        kind, text, pos = self.take()
        if kind != "num" or not text.isdigit():
            raise ExprSyntaxError("exponent must be an integer literal", pos, self.text)
        if paren:
            self.expect(")")
        return sign * int(text)

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "name":
            return self.lookup(text, pos, self.text)
        if text == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ExprSyntaxError(f"unexpected {text or 'end of input'!r}", pos, self.text)


_UVAR = re.compile(r"u([1-9]\d*)\Z")


def parse(text: str, d: int | None = None, names: Sequence[str] | None = None) -> Expr:
    """Parse expression text.

    By default variables are ``u1 .. u<d>``. Passing ``names`` instead maps
    ``names[j-1]`` to variable ``j`` (used for fields in ``x1 .. xn, t`` and
    for parameter templates).
    """
    if names is not None:
        table = {nm: j for j, nm in enumerate(names, start=1)}

        def lookup(name, pos, src):
            if name not in table:
                raise ExprSyntaxError(f"unknown variable {name!r}", pos, src)
            return Var(table[name])
    else:
        if d is None or d < 1:
            raise ValueError("variable dimension d must be a positive integer")

        def lookup(name, pos, src):
            m = _UVAR.match(name)
            if m is None:
                raise ExprSyntaxError(f"unknown variable {name!r}", pos, src)
            j = int(m.group(1))
            if j > d:
                raise ExprSyntaxError(f"variable index out of range: {name} with d={d}",
                                      pos, src)
            return Var(j)

    return _Parser(text, lookup).parse()

# }}}
