"""Hodograph solutions of the N-component Jordan system.

For hodograph functions ``f_1 .. f_{Nn}`` of ``u = (u_1 .. u_{Nn})`` the
implicit equations

    x_i = u_i t + f_i(u)   (i <= n),        0 = t + f_i(u)   (i > n)

define ``u(x, t)``. Their Jacobian with respect to ``u`` is the matrix
``A = t*omega + df/du`` (``omega`` is the identity on the leading n x n block
and zero elsewhere), whose inverse yields every first derivative of the
solution and whose determinant vanishes on the blow-up hypersurface.

Array indices here are 0-based: ``u[0]`` is ``u_1``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from .expr import EvalError, Expr, compile_exprs, diff, parse, variables

__all__ = [
    "FunSystem", "AMatrix", "SolveResult", "PointDerivatives",
    "BlowupLocusError", "UnderdeterminedError", "ContinuationError",
    "hodograph_residual", "assemble_A", "solve_hodograph", "field_derivatives",
    "blowup_first_time", "solve_hodograph_mixed", "default_u0", "singular_tol",
]

MAX_HALVINGS = 8
BISECTION_TOL = 1e-6


class BlowupLocusError(ArithmeticError):
    """A is singular at the requested point: derivatives of u are unbounded."""

    def __init__(self, message="on-blowup-locus"):
        super().__init__(message)
        self.reason = "on-blowup-locus"


class UnderdeterminedError(ValueError):
    """Some unknown appears in none of the equations of a mixed system."""


class ContinuationError(RuntimeError):
    """Newton failed while following the solution branch in t."""

    def __init__(self, message, last_good_t):
        super().__init__(f"{message} (last good t={last_good_t})")
        self.last_good_t = last_good_t


@dataclass(frozen=True)
class FunSystem:
    """The family ``f_1 .. f_{Nn}``; every function is over ``d = N*n`` variables."""

    n: int
    N: int
    funs: tuple[Expr, ...]

    def __post_init__(self):
        if self.n < 1 or self.N < 1:
            raise ValueError("n and N must be positive")
        object.__setattr__(self, "funs", tuple(self.funs))
        if len(self.funs) != self.n * self.N:
            raise ValueError(f"expected {self.n * self.N} functions, got {len(self.funs)}")
        for f in self.funs:
            used = variables(f)
            if used and max(used) > self.dim:
                raise ValueError(f"function uses u{max(used)} but d={self.dim}")

    @classmethod
    def from_strings(cls, n: int, N: int, texts: Sequence[str]) -> "FunSystem":
        return cls(n, N, tuple(parse(t, n * N) for t in texts))

    @property
    def dim(self) -> int:
        return self.n * self.N

    @cached_property
    def first_derivatives(self) -> tuple[tuple[Expr, ...], ...]:
        d = self.dim
        return tuple(tuple(diff(f, k) for k in range(1, d + 1)) for f in self.funs)

    @cached_property
    def second_derivatives(self) -> tuple:
        # [i][k][m] = d2 f_i / du_k du_m
        d = self.dim
        return tuple(tuple(tuple(diff(dfk, m) for m in range(1, d + 1)) for dfk in row)
                     for row in self.first_derivatives)

    @cached_property
    def _values_fn(self):
        return compile_exprs(self.funs, self.dim)

    @cached_property
    def _jacobian_fn(self):
        return compile_exprs([e for row in self.first_derivatives for e in row], self.dim)

    @cached_property
    def _hessian_fn(self):
        flat = [e for row in self.second_derivatives for col in row for e in col]
        return compile_exprs(flat, self.dim)

    def values(self, u) -> np.ndarray:
        return np.asarray(self._values_fn(_as_list(u)), dtype=float)

    def jacobian(self, u) -> np.ndarray:
        d = self.dim
        return np.asarray(self._jacobian_fn(_as_list(u)), dtype=float).reshape(d, d)

    def hessian(self, u) -> np.ndarray:
        """Array ``H[j, k, m] = d2 f_j / du_k du_m``."""
        d = self.dim
        return np.asarray(self._hessian_fn(_as_list(u)), dtype=float).reshape(d, d, d)


def _as_list(u) -> list:
    # python floats so that division by zero raises instead of producing inf
    return [float(v) for v in np.asarray(u, dtype=float).ravel()]


def singular_tol(M: np.ndarray) -> float:
    return 1e-12 * max(float(np.abs(M).sum(axis=1).max()) if M.size else 0.0, 1.0)


@dataclass
class AMatrix:
    entries: np.ndarray
    t: float
    det: float
    inverse: np.ndarray | None
    _lu: tuple | None = field(default=None, repr=False)

    @property
    def singular(self) -> bool:
        return self.inverse is None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is None:
            raise BlowupLocusError()
        return scipy.linalg.lu_solve(self._lu, rhs)


def _factor(M: np.ndarray, t: float = float("nan")) -> AMatrix:
    M = np.array(M, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    swaps = np.count_nonzero(piv != np.arange(len(piv)))
    det = float(np.prod(np.diag(lu))) * (-1.0) ** swaps
    if abs(det) <= singular_tol(M) or not np.all(np.isfinite(lu)):
        return AMatrix(M, t, det, None, None)
    inv = scipy.linalg.lu_solve((lu, piv), np.eye(len(M)))
    return AMatrix(M, t, det, inv, (lu, piv))


def omega(sys: FunSystem) -> np.ndarray:
    w = np.zeros((sys.dim, sys.dim))
    w[: sys.n, : sys.n] = np.eye(sys.n)
    return w


def hodograph_residual(sys: FunSystem, u, x, t: float) -> np.ndarray:
    """``u_i t + f_i(u) - x_i`` for i <= n and ``t + f_i(u)`` beyond."""
    u = np.asarray(u, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if u.shape != (sys.dim,) or x.shape != (sys.n,):
        raise ValueError("dimension mismatch")
    r = sys.values(u)
    r[: sys.n] += u[: sys.n] * t - x
    r[sys.n:] += t
    return r


def assemble_A(sys: FunSystem, u, t: float) -> AMatrix:
    A = sys.jacobian(u)
    A[: sys.n, : sys.n] += t * np.eye(sys.n)
    return _factor(A, t)


def default_u0(sys: FunSystem, x, t: float) -> np.ndarray:
    u0 = np.zeros(sys.dim)
    u0[: sys.n] = np.atleast_1d(x) / max(t, 1.0)
    return u0


@dataclass
class SolveResult:
    u: np.ndarray
    converged: bool
    iterations: int
    residual_norm: float
    det: float
    reason: str | None = None  # "singular-jacobian" | "diverged" | "max-iter"


def _newton(residual, jacobian, u0, tol, max_iter) -> SolveResult:
    """Damped Newton with step-halving backtracking, infinity norm."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    u = np.array(u0, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("u0 must be finite")
    F = residual(u)
    norm = float(np.abs(F).max())
    its = 0
    while True:
        if norm <= tol:
            A = _factor(jacobian(u))
            if A.singular:
                # a root on the blow-up locus is not isolated
                return SolveResult(u, False, its, norm, A.det, "singular-jacobian")
            return SolveResult(u, True, its, norm, A.det)
        if its >= max_iter:
            return SolveResult(u, False, its, norm, _factor(jacobian(u)).det, "max-iter")
        A = _factor(jacobian(u))
        if A.singular:
            return SolveResult(u, False, its, norm, A.det, "singular-jacobian")
        step = A.solve(F)
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = u - lam * step
            try:
                Ft = residual(trial)
                nt = float(np.abs(Ft).max())
            except EvalError:
                nt = np.inf
            if nt < norm:
                break
            lam *= 0.5
        else:
            return SolveResult(u, False, its, norm, A.det, "diverged")
        u, F, norm = trial, Ft, nt
        its += 1


def solve_hodograph(sys: FunSystem, x, t: float, u0=None, tol: float = 1e-12,
                    max_iter: int = 50) -> SolveResult:
    """Solve the hodograph equations for ``u`` at ``(x, t)``.

    The Newton Jacobian is exactly ``A``. On failure the result carries
    ``converged=False`` and a ``reason`` rather than raising.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if u0 is None:
        u0 = default_u0(sys, x, t)

    def jac(u):
        A = sys.jacobian(u)
        A[: sys.n, : sys.n] += t * np.eye(sys.n)
        return A

    return _newton(lambda u: hodograph_residual(sys, u, x, t), jac, u0, tol, max_iter)


@dataclass
class PointDerivatives:
    dudx: np.ndarray  # (Nn, n)
    dudt: np.ndarray  # (Nn,)


def field_derivatives(sys: FunSystem, u, t: float) -> PointDerivatives:
    """First derivatives of the solution from ``A^{-1}``.

    ``du_i/dx_k = (A^{-1})_{ik}`` and
    ``du_i/dt = -sum_{k<=n} (A^{-1})_{ik} u_k - sum_{m>n} (A^{-1})_{im}``.
    """
    u = np.asarray(u, dtype=float)
    A = assemble_A(sys, u, t)
    if A.singular:
        raise BlowupLocusError()
    inv = A.inverse
    n = sys.n
    dudx = inv[:, :n].copy()
    dudt = -inv[:, :n] @ u[:n] - inv[:, n:].sum(axis=1)
    return PointDerivatives(dudx, dudt)


def blowup_first_time(sys: FunSystem, x, t_range, u0=None, steps: int = 41,
                      tol: float = 1e-12, max_iter: int = 50) -> float | None:
    """First ``t`` along the solution branch through ``x`` where ``det A`` vanishes.

    The branch is followed by warm-started solves at ``steps`` uniform times.
    A sign change or vanishing of ``det A`` is refined by bisection to 1e-6
    in ``t``. When Newton fails between two times the bracket is bisected as
    well and the failure counts as a fold only if ``det A`` tends to zero
    towards it. Returns ``None`` if ``det A`` keeps its sign.
    """
    t0, t1 = map(float, t_range)
    if steps < 2:
        raise ValueError("steps must be >= 2")
    if not (np.isfinite(t0) and np.isfinite(t1)):
        raise ValueError("t range must be finite")
    x = np.atleast_1d(np.asarray(x, dtype=float))

    def solve_at(t, ustart):
        scale = max(1.0, float(np.abs(ustart).max()), float(np.abs(x).max()))
        return solve_hodograph(sys, x, t, ustart, tol * scale, max_iter)

    res = solve_at(t0, default_u0(sys, x, t0) if u0 is None else np.asarray(u0, float))
    if not res.converged:
        raise ContinuationError(f"Newton failed at the start ({res.reason})", None)
    if res.det == 0.0:
        return t0

    def bisect(a, ua, deta, b):
        while b - a > BISECTION_TOL:
            m = 0.5 * (a + b)
            r = solve_at(m, ua)
            same = (r.converged and np.sign(r.det) == np.sign(deta)
                    and abs(r.det) > singular_tol(assemble_A(sys, r.u, m).entries))
            if same:
                a, ua, deta = m, r.u, r.det
            else:
                b = m
        return 0.5 * (a + b), deta

    t_prev, u_prev, det_prev = t0, res.u, res.det
    for t in np.linspace(t0, t1, steps)[1:]:
        r = solve_at(t, u_prev)
        if r.converged:
            if r.det == 0.0 or np.sign(r.det) != np.sign(det_prev):
                return bisect(t_prev, u_prev, det_prev, t)[0]
            t_prev, u_prev, det_prev = t, r.u, r.det
            continue
        t_star, det_end = bisect(t_prev, u_prev, det_prev, t)
        if abs(det_end) <= 0.1 * abs(det_prev):
            return t_star
        raise ContinuationError(f"Newton failed ({r.reason}) without det A tending to 0",
                                t_prev)
    return None


def solve_hodograph_mixed(sys: FunSystem, g: Sequence[Expr], x, t: float, u0=None,
                          tol: float = 1e-12, max_iter: int = 50) -> SolveResult:
    """Solve the mixed hodograph form.

    Equations: ``x_i = u_i t + f_i`` (i <= n), ``0 = t + f_{n+1}`` and
    ``0 = g_k(u)`` for the remaining ``Nn - n - 1`` rows. Only the first
    ``n + 1`` functions of ``sys`` are used.
    """
    n, d = sys.n, sys.dim
    g = list(g)
    if d < n + 1:
        raise ValueError("mixed form needs N >= 2")
    if len(g) != d - n - 1:
        raise ValueError(f"expected {d - n - 1} constraints g, got {len(g)}")
    x = np.atleast_1d(np.asarray(x, dtype=float))

    used: set[int] = set()
    for e in list(sys.funs[: n + 1]) + g:
        used |= variables(e)
    if t != 0:
        used |= set(range(1, n + 1))
    missing = sorted(set(range(1, d + 1)) - used)
    if missing:
        raise UnderdeterminedError(
            "underdetermined: " + ", ".join(f"u{j}" for j in missing) + " appear in no equation")

    exprs = list(sys.funs[: n + 1]) + g
    values = compile_exprs(exprs, d)
    jac_fn = compile_exprs([diff(e, k) for e in exprs for k in range(1, d + 1)], d)

    def residual(u):
        r = np.asarray(values(_as_list(u)), dtype=float)
        r[:n] += u[:n] * t - x
        r[n] += t
        return r

    def jacobian(u):
        J = np.asarray(jac_fn(_as_list(u)), dtype=float).reshape(d, d)
        J[:n, :n] += t * np.eye(n)
        return J

    if u0 is None:
        u0 = default_u0(sys, x, t)
    return _newton(residual, jacobian, u0, tol, max_iter)
