"""Random polynomial expressions and symbolic field sets with exact derivatives.

Field sets are expressions in ``(x1 .. xn, t)``; their derivatives come from
:func:`jordanflow.expr.diff`, so identity checks built on them carry no
discretization error.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .expr import Const, Expr, Var, compile_exprs, diff
from .hodograph import FunSystem

__all__ = ["Poly", "random_polynomial", "random_fun_system", "SymbolicFields", "xt_names"]


def xt_names(n: int) -> list[str]:
    return [f"x{k}" for k in range(1, n + 1)] + ["t"]


def _monomial(exps) -> Expr:
    e: Expr | None = None
    for j, k in enumerate(exps, start=1):
        if k == 0:
            continue
        f = Var(j) if k == 1 else Var(j) ** k
        e = f if e is None else e * f
    return Const(1.0) if e is None else e


@dataclass(frozen=True)
class Poly:
    """Polynomial as ``{exponent tuple: coefficient}`` in ``d`` variables."""

    d: int
    terms: dict

    @classmethod
    def random(cls, rng, d, degree, nterms, coef=1.0):
        monos = [m for m in itertools.product(range(degree + 1), repeat=d)
                 if sum(m) <= degree]
        pick = rng.choice(len(monos), size=min(nterms, len(monos)), replace=False)
        return cls(d, {monos[i]: float(rng.uniform(-coef, coef)) for i in sorted(pick)})

    def __add__(self, other: "Poly") -> "Poly":
        terms = dict(self.terms)
        for m, c in other.terms.items():
            terms[m] = terms.get(m, 0.0) + c
        return Poly(self.d, terms)

    def scale(self, c: float) -> "Poly":
        return Poly(self.d, {m: c * v for m, v in self.terms.items()})

    def derivative(self, j: int) -> "Poly":
        """d/du_j with 1-based ``j``."""
        out = {}
        for m, c in self.terms.items():
            if m[j - 1]:
                mm = list(m)
                mm[j - 1] -= 1
                out[tuple(mm)] = out.get(tuple(mm), 0.0) + c * m[j - 1]
        return Poly(self.d, out)

    def antiderivative(self, j: int) -> "Poly":
        """Primitive in u_j vanishing at u_j = 0."""
        out = {}
        for m, c in self.terms.items():
            mm = list(m)
            mm[j - 1] += 1
            out[tuple(mm)] = c / mm[j - 1]
        return Poly(self.d, out)

    def to_expr(self) -> Expr:
        e: Expr | None = None
        for m in sorted(self.terms):
            c = self.terms[m]
            term = Const(c) * _monomial(m) if any(m) else Const(c)
            e = term if e is None else e + term
        return Const(0.0) if e is None else e


@functools.lru_cache(maxsize=None)
def _monomials(d: int, degree: int) -> tuple[tuple[int, ...], ...]:
    """Exponent tuples of total degree <= ``degree``, lexicographically sorted."""
    out = []
    for k in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(d), k):
            m = [0] * d
            for j in combo:
                m[j] += 1
            out.append(tuple(m))
    return tuple(sorted(out))


def random_polynomial(rng: np.random.Generator, d: int, degree: int, nterms: int,
                      coef: float = 1.0, constant: float | None = None) -> Expr:
    """Sparse polynomial in ``d`` variables with coefficients in ``[-coef, coef]``."""
    monos = _monomials(d, degree)
    pick = rng.choice(len(monos), size=min(nterms, len(monos)), replace=False)
    e: Expr | None = None
    for idx in sorted(pick):
        c = float(rng.uniform(-coef, coef))
        term = Const(c) * _monomial(monos[idx]) if any(monos[idx]) else Const(c)
        e = term if e is None else e + term
    if constant is not None:
        e = Const(float(constant)) + e
    return e


def random_fun_system(rng: np.random.Generator, n: int, N: int, degree: int = 3,
                      nterms: int = 4) -> FunSystem:
    d = n * N
    return FunSystem(n, N, tuple(random_polynomial(rng, d, degree, nterms) for _ in range(d)))


@dataclass
class SymbolicFields:
    """Components as expressions in ``x1 .. xn, t`` (variable ``n+1`` is ``t``)."""

    n: int
    exprs: list[Expr]

    @classmethod
    def random(cls, rng, n, count, degree=3, nterms=5, coef=0.5, constant=None):
        return cls(n, [random_polynomial(rng, n + 1, degree, nterms, coef,
                                         None if constant is None else constant)
                       for _ in range(count)])

    def _eval(self, exprs, pts):
        fn = compile_exprs(exprs, self.n + 1)
        cols = [pts[:, j] for j in range(self.n + 1)]
        P = len(pts)
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), (P,))
                         for v in fn(cols)])

    def values(self, pts) -> np.ndarray:
        """``(C, P)`` at points ``pts`` of shape ``(P, n+1)``."""
        return self._eval(self.exprs, pts)

    def dt(self, pts) -> np.ndarray:
        return self._eval([diff(e, self.n + 1) for e in self.exprs], pts)

    def dx(self, pts) -> np.ndarray:
        """``(C, n, P)``."""
        C, n = len(self.exprs), self.n
        flat = [diff(e, k) for e in self.exprs for k in range(1, n + 1)]
        return self._eval(flat, pts).reshape(C, n, len(pts))

    def dxx(self, pts) -> np.ndarray:
        """``(C, n, n, P)``."""
        C, n = len(self.exprs), self.n
        flat = [diff(diff(e, k), m) for e in self.exprs
                for k in range(1, n + 1) for m in range(1, n + 1)]
        return self._eval(flat, pts).reshape(C, n, n, len(pts))
