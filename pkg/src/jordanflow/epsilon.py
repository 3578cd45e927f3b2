"""The epsilon-system: a hydrodynamic-type generator of Jordan chain solutions.

Fields ``V[i, a]`` (``i < n`` spatial component, ``a < M`` family) obey

    d_t V_ia + sum_k lam_{ia,k} d_{x_k} V_ia = 0,
    lam_{ia,k} = sum_b eps_kb V_kb + delta_ik V_ia**n,

and their power sums ``u_{ln+i} = sum_a eps_ia V_ia**(ln+1) / (ln+1)`` solve
the chain. Array layout: ``V`` is ``(n, M, *nodes)``, ``dVdx`` is
``(n, M, n, *nodes)``, ``d2Vdx2`` is ``(n, M, n, n, *nodes)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import mol
from .fields import FieldGrid, ResidualReport, grid_first_derivatives

__all__ = [
    "EpsilonSystem", "lambda_speeds", "power_sum", "power_sum_fields",
    "power_sum_derivatives", "eps_residual", "chain_identity_defect",
    "integrate_eps", "eps_residual_grid", "eps_ns_constraint_residual",
    "eps_continuity_residual", "eps_burgers_constraint_residual",
    "characteristics_solution",
]


@dataclass
class EpsilonSystem:
    n: int
    M: int
    eps: np.ndarray
    V: FieldGrid | None = None  # n*M fields, component i*M + a

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float).reshape(self.n, self.M)
        if not np.all(np.isfinite(self.eps)):
            raise ValueError("eps must be finite")
        if self.M < 1:
            raise ValueError("M must be >= 1")

    def V_array(self) -> np.ndarray:
        """Stored fields reshaped to ``(n, M, nt, *space)``."""
        if self.V is None:
            raise ValueError("no fields attached")
        return self.V.values.reshape((self.n, self.M) + self.V.values.shape[1:])


def lambda_speeds(es: EpsilonSystem, V) -> np.ndarray:
    """Characteristic speeds ``lam[i, a, k, *nodes]``."""
    V = np.asarray(V, dtype=float)
    n = es.n
    eps = es.eps.reshape(es.eps.shape + (1,) * (V.ndim - 2))
    u = (eps * V).sum(axis=1)  # (n, *nodes): u_k = sum_b eps_kb V_kb
    lam = np.broadcast_to(u[None, None], (n, es.M) + u.shape).copy()
    for i in range(n):
        lam[i, :, i] += V[i] ** n
    return lam


def power_sum(es: EpsilonSystem, l: int, i: int, V) -> np.ndarray:
    """``u_{ln+i} = sum_a eps_ia V_ia**(ln+1) / (ln+1)`` (``i`` 0-based)."""
    if l < 0 or not 0 <= i < es.n:
        raise ValueError("need l >= 0 and 0 <= i < n")
    V = np.asarray(V, dtype=float)
    q = l * es.n + 1
    eps = es.eps[i].reshape((es.M,) + (1,) * (V.ndim - 2))
    return (eps * V[i] ** q).sum(axis=0) / q


def power_sum_fields(es: EpsilonSystem, V, K: int) -> np.ndarray:
    """Blocks ``l = 0 .. K-1`` of power sums, shape ``(K*n, *nodes)``."""
    return np.stack([power_sum(es, l, i, V) for l in range(K) for i in range(es.n)])


def power_sum_derivatives(es: EpsilonSystem, V, dV, l: int, i: int) -> np.ndarray:
    """Derivative of ``u_{ln+i}`` given the matching derivative ``dV`` of ``V``.

    ``dV`` has the layout of ``V`` possibly with extra axes after the family
    axis (e.g. ``(n, M, n, *nodes)`` for spatial gradients).
    """
    V = np.asarray(V, dtype=float)
    dV = np.asarray(dV, dtype=float)
    q = l * es.n
    extra = dV.ndim - V.ndim
    w = es.eps[i].reshape((es.M,) + (1,) * (V.ndim - 2)) * V[i] ** q
    w = w.reshape((es.M,) + (1,) * extra + w.shape[1:])
    return (w * dV[i]).sum(axis=0)


def eps_residual(es: EpsilonSystem, V, dVdt, dVdx) -> np.ndarray:
    """``r[i, a] = d_t V_ia + sum_k lam_{ia,k} d_{x_k} V_ia``."""
    lam = lambda_speeds(es, V)
    return np.asarray(dVdt, dtype=float) + (lam * np.asarray(dVdx, dtype=float)).sum(axis=2)


def chain_identity_defect(es: EpsilonSystem, V, dVdt, dVdx, l: int, i: int) -> np.ndarray:
    """Chain residual of the power sums minus ``sum_a eps_ia V_ia**(ln) r_ia``.

    Vanishes for any smooth fields, solutions or not. Power-sum derivatives
    are formed from ``dV`` by the chain rule.
    """
    n = es.n
    V = np.asarray(V, dtype=float)
    u = np.stack([power_sum(es, 0, k, V) for k in range(n)])
    u_t = power_sum_derivatives(es, V, dVdt, l, i)
    u_x = power_sum_derivatives(es, V, dVdx, l, i)          # (n, *nodes)
    next_x = power_sum_derivatives(es, V, dVdx, l + 1, i)   # (n, *nodes)
    chain = u_t + (u * u_x).sum(axis=0) + next_x[i]
    r = eps_residual(es, V, dVdt, dVdx)
    w = es.eps[i].reshape((es.M,) + (1,) * (V.ndim - 2)) * V[i] ** (l * n)
    return chain - (w * r[i]).sum(axis=0)


def _eps_tendency(es: EpsilonSystem, space_shape):
    n, M = es.n, es.M

    def tendency(U, D, k):
        V = U.reshape((n, M) + space_shape)
        lam = lambda_speeds(es, V)[:, :, k]
        return (lam * D.reshape(V.shape)).reshape(U.shape)
    return tendency


def _eps_speeds(es: EpsilonSystem, space_shape):
    def speeds(U, k):
        V = U.reshape((es.n, es.M) + space_shape)
        return lambda_speeds(es, V)[:, :, k].reshape(U.shape)
    return speeds


def integrate_eps(es: EpsilonSystem, initial: FieldGrid, t_end: float, dt: float,
                  scheme: str = "upwind1") -> EpsilonSystem:
    """Advance ``V`` on a periodic lattice; returns a copy with the space-time fields.

    ``initial`` carries ``n*M`` fields (``K = M`` blocks of ``n``), ordered
    ``i*M + a``, at a single time level.
    """
    n, M = es.n, es.M
    if len(initial.t) != 1 or initial.values.shape[0] != n * M:
        raise ValueError("initial grid must hold n*M fields at one time level")
    space = initial.values.shape[2:]
    U0 = initial.values[:, 0]
    t, frames = mol.integrate(U0, float(initial.t[0]), t_end, dt, initial.h,
                              _eps_tendency(es, space), _eps_speeds(es, space), scheme)
    grid = FieldGrid(n, M, initial.x, t, np.moveaxis(frames, 0, 1), periodic=True)
    return EpsilonSystem(n, M, es.eps, grid)


def eps_residual_grid(es: EpsilonSystem) -> ResidualReport:
    grid = es.V
    dVdt, dVdx = grid_first_derivatives(grid)
    n, M = es.n, es.M
    shape = grid.values.shape[1:]
    r = eps_residual(es, es.V_array(), dVdt.reshape((n, M) + shape),
                     dVdx.reshape((n, M, n) + shape))
    labels = [f"eps[i={i + 1},a={a + 1}]" for i in range(n) for a in range(M)]
    return ResidualReport.from_arrays(labels, r.reshape((n * M,) + shape))


def eps_ns_constraint_residual(es: EpsilonSystem, V, dVdx, d2Vdx2, rho, grad_p,
                               params) -> np.ndarray:
    """``rho sum_a eps_ia V_ia^n d_i V_ia + eta sum_a eps_ia Lap V_ia
    + (xi + eta/3) sum_{k,a} eps_ka d_i d_k V_ka - d_i p``."""
    n = es.n
    V = np.asarray(V, dtype=float)
    d2 = np.asarray(d2Vdx2, dtype=float)
    eps = es.eps.reshape(es.eps.shape + (1,) * (V.ndim - 2))
    grad_p = np.asarray(grad_p, dtype=float)
    out = []
    for i in range(n):
        first = (eps[i] * V[i] ** n * dVdx[i, :, i]).sum(axis=0)
        lap = (eps[i] * sum(d2[i, :, k, k] for k in range(n))).sum(axis=0)
        mixed = sum((eps[k] * d2[k, :, i, k]).sum(axis=0) for k in range(n))
        out.append(rho * first + params.eta * lap + params.bulk * mixed - grad_p[i])
    return np.stack(out)


def eps_continuity_residual(es: EpsilonSystem, V, dVdx, rho, drho_dt, drho_dx) -> np.ndarray:
    """``d_t rho + sum_{i,a} d_i(rho eps_ia V_ia)``."""
    V = np.asarray(V, dtype=float)
    eps = es.eps.reshape(es.eps.shape + (1,) * (V.ndim - 2))
    r = np.asarray(drho_dt, dtype=float)
    for i in range(es.n):
        r = r + (eps[i] * (drho_dx[i] * V[i] + rho * dVdx[i, :, i])).sum(axis=0)
    return r


def eps_burgers_constraint_residual(es: EpsilonSystem, V, dVdx, d2Vdx2, nu) -> np.ndarray:
    """``sum_a eps_ia V_ia^n d_i V_ia - nu sum_a eps_ia Lap V_ia``."""
    n = es.n
    V = np.asarray(V, dtype=float)
    d2 = np.asarray(d2Vdx2, dtype=float)
    eps = es.eps.reshape(es.eps.shape + (1,) * (V.ndim - 2))
    return np.stack([(eps[i] * (V[i] ** n * dVdx[i, :, i]
                                - nu * sum(d2[i, :, k, k] for k in range(n)))).sum(axis=0)
                     for i in range(n)])


def characteristics_solution(V0, dV0, x, t: float, speed_factor: float = 2.0,
                             period: float | None = None, tol: float = 1e-14) -> np.ndarray:
    """Exact smooth solution of ``V_t + c V V_x = 0`` with ``V(x, 0) = V0(x)``.

    Solves ``x = X0 + c t V0(X0)`` for the foot point ``X0`` by Newton and
    returns ``V0(X0)``. ``c = 2`` is the single-family case ``n = M = 1,
    eps = 1``. Valid before the gradient catastrophe.
    """
    x = np.asarray(x, dtype=float)

    def F(X):
        return X + speed_factor * t * V0(X) - x

    def J(X):
        return 1.0 + speed_factor * t * dV0(X)

    if np.any(J(np.linspace(x.min() - 1, x.max() + 1, 2001) if period is None
                else np.linspace(0, period, 2001)) <= 0):
        raise ValueError("characteristics cross before t; no smooth solution")
    X = scipy.optimize.newton(F, x.copy(), fprime=J, tol=tol, maxiter=100)
    return V0(X)
