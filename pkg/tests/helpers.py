"""Shared generators and independent oracles for the tests."""

import numpy as np
import sympy

from jordanflow.expr import Add, Const, Div, Expr, Mul, Neg, Pow, Sub, Var


def _leaf(rng, d):
    if rng.random() < 0.6:
        return Var(int(rng.integers(1, d + 1)))
    return Const(float(np.round(rng.uniform(-1, 1), 3)))


def _safe_denominator(rng, d, depth):
    # c + s^2 with c in [1, 2] keeps poles away from every real point
    return Add(Const(float(np.round(rng.uniform(1, 2), 3))), Pow(_tree(rng, d, depth), 2))


def _tree(rng, d, depth):
    if depth == 0:
        return _leaf(rng, d)
    op = rng.choice(["add", "sub", "mul", "div", "pow", "neg", "leaf"],
                    p=[0.2, 0.15, 0.25, 0.15, 0.12, 0.05, 0.08])
    if op == "leaf":
        return _leaf(rng, d)
    if op == "neg":
        return Neg(_tree(rng, d, depth - 1))
    if op == "pow":
        k = int(rng.choice([2, 3, -1, -2]))
        base = _tree(rng, d, depth - 1) if k > 0 else _safe_denominator(rng, d, depth - 1)
        return Pow(base, k)
    a = _tree(rng, d, depth - 1)
    if op == "div":
        return Div(a, _safe_denominator(rng, d, depth - 1))
    b = _tree(rng, d, depth - 1)
    return {"add": Add, "sub": Sub, "mul": Mul}[op](a, b)


def random_rational_expr(rng, d: int, depth: int = 3) -> Expr:
    """Random rational expression whose denominators have no real zeros."""
    return _tree(rng, d, depth)


def to_sympy(e: Expr, syms):
    """Independent translation of an expression tree into sympy."""
    if isinstance(e, Const):
        return sympy.Rational(repr(e.value)) if e.value == e.value else sympy.nan
    if isinstance(e, Var):
        return syms[e.index - 1]
    if isinstance(e, Add):
        return to_sympy(e.left, syms) + to_sympy(e.right, syms)
    if isinstance(e, Sub):
        return to_sympy(e.left, syms) - to_sympy(e.right, syms)
    if isinstance(e, Mul):
        return to_sympy(e.left, syms) * to_sympy(e.right, syms)
    if isinstance(e, Div):
        return to_sympy(e.left, syms) / to_sympy(e.right, syms)
    if isinstance(e, Pow):
        return to_sympy(e.base, syms) ** e.exponent
    if isinstance(e, Neg):
        return -to_sympy(e.operand, syms)
    raise TypeError(type(e))
