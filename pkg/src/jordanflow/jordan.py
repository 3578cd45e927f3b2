"""Residuals of the Jordan system/chain and a direct integrator.

Component ``l*n + i`` (0-based ``i``) of ``u`` is the ``i``-th entry of
block ``l``. The chain equation for block ``l`` is

    d_t u_{ln+i} + sum_k u_k d_{x_k} u_{ln+i} + d_{x_i} u_{(l+1)n+i} = 0,

and the N-component system closes the top block by dropping the last term.
``N = 1`` is the homogeneous Euler equation.
"""

from __future__ import annotations

import numpy as np

from . import mol
from .fields import FieldGrid, ResidualReport, grid_first_derivatives
from .hodograph import BlowupLocusError, FunSystem, PointDerivatives, assemble_A

__all__ = [
    "transport", "chain_residuals", "jordan_residual_point", "jordan_residual_grid",
    "euler_residual", "euler_residual_point", "constraint_residual_A",
    "integrate_jordan", "jordan_labels",
]


def transport(u, dudt, dudx, n: int, c: int) -> np.ndarray:
    """``d_t u_c + sum_k u_k d_{x_k} u_c`` for component ``c``."""
    out = np.array(dudt[c], dtype=float)
    for k in range(n):
        out = out + u[k] * dudx[c, k]
    return out


def chain_residuals(u, dudt, dudx, n: int, N: int | None = None) -> np.ndarray:
    """Stacked residuals, shape ``(rows, *nodes)``.

    With ``N=None`` the truncated chain is evaluated for every block that has
    a successor (``l = 0 .. K-2``). With ``N`` given the N-component system is
    evaluated on the first ``N`` blocks, its top block without coupling.
    Arrays: ``u, dudt`` are ``(C, *nodes)``, ``dudx`` is ``(C, n, *nodes)``.
    """
    u = np.asarray(u, dtype=float)
    dudt = np.asarray(dudt, dtype=float)
    dudx = np.asarray(dudx, dtype=float)
    K = u.shape[0] // n
    if N is None:
        if K < 2:
            raise ValueError("chain residuals need at least 2 blocks")
        levels, top = K - 1, False
    else:
        if N > K:
            raise ValueError(f"N={N} blocks requested but only {K} available")
        levels, top = N, True
    rows = []
    for l in range(levels):
        for i in range(n):
            c = l * n + i
            r = transport(u, dudt, dudx, n, c)
            if not (top and l == levels - 1):
                r = r + dudx[(l + 1) * n + i, i]
            rows.append(r)
    return np.stack(rows)


def jordan_labels(n: int, levels: int, prefix: str = "jordan") -> list[str]:
    return [f"{prefix}[l={l},i={i + 1}]" for l in range(levels) for i in range(n)]


def jordan_residual_point(derivs: PointDerivatives, u, n: int, N: int) -> np.ndarray:
    """Residual vector of the N-component system at one point (length ``N*n``)."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] != N * n or derivs.dudx.shape != (N * n, n):
        raise ValueError("derivatives must be dimensioned N*n")
    return chain_residuals(u, derivs.dudt, derivs.dudx, n, N)


def euler_residual_point(derivs: PointDerivatives, u, n: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return chain_residuals(u[:n], derivs.dudt[:n], derivs.dudx[:n], n, 1)


def jordan_residual_grid(grid: FieldGrid, N: int | None = None) -> ResidualReport:
    """Grid residuals by second-order differences (one-sided at the ends)."""
    if N is None and grid.K < 2:
        raise ValueError("chain mode needs a grid with at least 2 blocks")
    dudt, dudx = grid_first_derivatives(grid)
    res = chain_residuals(grid.values, dudt, dudx, grid.n, N)
    levels = grid.K - 1 if N is None else N
    return ResidualReport.from_arrays(jordan_labels(grid.n, levels), res)


def euler_residual(grid: FieldGrid) -> ResidualReport:
    dudt, dudx = grid_first_derivatives(grid)
    n = grid.n
    res = chain_residuals(grid.values[:n], dudt[:n], dudx[:n], n, 1)
    return ResidualReport.from_arrays([f"euler[i={i + 1}]" for i in range(n)], res)


def constraint_residual_A(sys: FunSystem, u, t: float) -> np.ndarray:
    """Constraints on ``A^{-1}`` whose vanishing makes hodograph solutions Jordan solutions.

    Lower blocks: ``sum_{m>n} (A^{-1})_{ln+i, m} - (A^{-1})_{(l+1)n+i, i}``;
    top block: ``sum_{m>n} (A^{-1})_{(N-1)n+i, m}``. Empty for ``N = 1``.
    """
    n, N = sys.n, sys.N
    if N == 1:
        return np.zeros(0)
    A = assemble_A(sys, u, t)
    if A.singular:
        raise BlowupLocusError()
    inv = A.inverse
    tail = inv[:, n:].sum(axis=1)
    c = tail.copy()
    for l in range(N - 1):
        for i in range(n):
            c[l * n + i] -= inv[(l + 1) * n + i, i]
    return c


def _jordan_tendency(n: int, N: int):
    def tendency(U, D, k):
        out = U[k] * D
        for l in range(N - 1):
            out[l * n + k] += D[(l + 1) * n + k]
        return out
    return tendency


def _jordan_speeds(U, k):
    # every characteristic speed along x_k equals u_k
    return np.broadcast_to(U[k], U.shape)


def integrate_jordan(initial: FieldGrid, N: int, t_end: float, dt: float,
                     scheme: str = "upwind1") -> FieldGrid:
    """Method-of-lines advance of the N-component system with periodic boundaries.

    ``initial`` must hold a single time level with at least ``N`` blocks on a
    periodic spatial lattice; only the first ``N`` blocks are evolved.
    """
    if len(initial.t) != 1:
        raise ValueError("initial grid must hold exactly one time level")
    if initial.K < N:
        raise ValueError(f"initial data has {initial.K} blocks, N={N} needed")
    n = initial.n
    U0 = initial.values[: N * n, 0]
    t, frames = mol.integrate(U0, float(initial.t[0]), t_end, dt, initial.h,
                              _jordan_tendency(n, N), _jordan_speeds, scheme)
    values = np.moveaxis(frames, 0, 1)
    return FieldGrid(n, N, initial.x, t, values, periodic=True)
