"""Finite-component reductions of the Jordan chain.

The first chain equation closes into a named PDE once the divergence-like
coupling ``d_{x_i} u_{n+i}`` is prescribed:

* compressible Navier-Stokes with continuity for the density,
* incompressible inviscid flow (pressure Poisson relation),
* the n-dimensional Burgers equation (sign convention ``+ nu * Lap u``).

Each constraint also has an f-space form evaluated on the hodograph solution
manifold, where ``d/dx_k`` acting on a function of ``(u, t)`` at fixed ``t``
is ``sum_m d/du_m (.) * (A^{-1})_{mk}``. The sums over ``m`` formally run over
the whole chain; here they stop at ``Nn`` for a finite system.

Arrays follow the layout of :mod:`jordanflow.jordan`: ``u`` and ``dudt`` are
``(C, *nodes)``, ``dudx`` is ``(C, n, *nodes)``, ``d2udx2`` is
``(C, n, n, *nodes)``. Nodes may be empty (a single point).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import FieldGrid, ddt, ddx, grid_first_derivatives, grid_second_derivatives
from .hodograph import BlowupLocusError, FunSystem, assemble_A
from .jordan import chain_residuals, transport

__all__ = [
    "MediumParams", "FirstDerivs", "SecondDerivs",
    "ns_constraint_residual", "continuity_residual", "ns_residual",
    "recurrence_next_div", "f_constraint_ns_residual", "incompressible_residuals",
    "f_constraint_incompressible_residual", "burgers_residuals",
    "f_constraint_burgers_residual", "chain_l0_with_ns_closure",
    "chain_l0_with_burgers_closure", "inverse_derivatives", "derivs_from_grid",
]


@dataclass(frozen=True)
class MediumParams:
    eta: float = 0.0
    xi: float = 0.0
    nu: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite([self.eta, self.xi, self.nu])):
            raise ValueError("medium parameters must be finite")

    @property
    def bulk(self) -> float:
        return self.xi + self.eta / 3.0


@dataclass
class FirstDerivs:
    u: np.ndarray
    dudt: np.ndarray
    dudx: np.ndarray

    @property
    def n(self) -> int:
        return self.dudx.shape[1]


@dataclass
class SecondDerivs:
    """Second spatial derivatives of ``u`` plus the density and pressure data."""

    d2udx2: np.ndarray
    rho: np.ndarray | float = 1.0
    drho_dt: np.ndarray | float = 0.0
    drho_dx: np.ndarray | None = None   # (n, *nodes)
    grad_p: np.ndarray | None = None    # (n, *nodes)
    laplacian_p: np.ndarray | float = 0.0
    grad_div: np.ndarray | None = field(default=None)  # (n, *nodes)

    def __post_init__(self):
        self.d2udx2 = np.asarray(self.d2udx2, dtype=float)
        n = self.d2udx2.shape[1]
        nodes = self.d2udx2.shape[3:]
        if self.grad_div is None:
            # d/dx_i sum_k d u_k / dx_k
            self.grad_div = np.stack([sum(self.d2udx2[k, k, i] for k in range(n))
                                      for i in range(n)])
        if self.grad_p is None:
            self.grad_p = np.zeros((n,) + nodes)
        if self.drho_dx is None:
            self.drho_dx = np.zeros((n,) + nodes)

    def laplacian(self, c: int) -> np.ndarray:
        n = self.d2udx2.shape[1]
        return sum(self.d2udx2[c, k, k] for k in range(n))


def _check_rho(rho):
    if np.any(np.asarray(rho) <= 0):
        raise ValueError("density must be positive")


def ns_constraint_residual(first: FirstDerivs, second: SecondDerivs,
                           params: MediumParams) -> np.ndarray:
    """``d_i u_{n+i} + (1/rho)(-d_i p + eta Lap u_i + (xi + eta/3) d_i div u)``."""
    n = first.n
    _check_rho(second.rho)
    out = []
    for i in range(n):
        forcing = (-second.grad_p[i] + params.eta * second.laplacian(i)
                   + params.bulk * second.grad_div[i])
        out.append(first.dudx[n + i, i] + forcing / second.rho)
    return np.stack(out)


def continuity_residual(first: FirstDerivs, second: SecondDerivs) -> np.ndarray:
    """``d_t rho + sum_i d_i(rho u_i)``."""
    n = first.n
    r = np.asarray(second.drho_dt, dtype=float)
    for i in range(n):
        r = r + second.drho_dx[i] * first.u[i] + second.rho * first.dudx[i, i]
    return r


def ns_residual(first: FirstDerivs, second: SecondDerivs, params: MediumParams) -> np.ndarray:
    """``rho (d_t u_i + u.grad u_i) + d_i p - eta Lap u_i - (xi + eta/3) d_i div u``."""
    n = first.n
    out = []
    for i in range(n):
        adv = transport(first.u, first.dudt, first.dudx, n, i)
        out.append(second.rho * adv + second.grad_p[i] - params.eta * second.laplacian(i)
                   - params.bulk * second.grad_div[i])
    return np.stack(out)


def chain_l0_with_ns_closure(first: FirstDerivs, second: SecondDerivs,
                             params: MediumParams) -> np.ndarray:
    """First chain equation with ``d_i u_{n+i}`` replaced by the NS constraint value."""
    n = first.n
    _check_rho(second.rho)
    dudx = np.array(first.dudx[: 2 * n], dtype=float)
    for i in range(n):
        forcing = (-second.grad_p[i] + params.eta * second.laplacian(i)
                   + params.bulk * second.grad_div[i])
        dudx[n + i, i] = -forcing / second.rho
    return chain_residuals(first.u[: 2 * n], first.dudt[: 2 * n], dudx, n, None)[:n]


def chain_l0_with_burgers_closure(first: FirstDerivs, second: SecondDerivs,
                                  params: MediumParams) -> np.ndarray:
    n = first.n
    dudx = np.array(first.dudx[: 2 * n], dtype=float)
    for i in range(n):
        dudx[n + i, i] = params.nu * second.laplacian(i)
    return chain_residuals(first.u[: 2 * n], first.dudt[: 2 * n], dudx, n, None)[:n]


def recurrence_next_div(first: FirstDerivs, l: int) -> np.ndarray:
    """``d_{x_i} u_{(l+1)n+i} = -d_t u_{ln+i} - sum_k u_k d_{x_k} u_{ln+i}``."""
    n = first.n
    if (l + 1) * n > first.u.shape[0]:
        raise ValueError(f"fields for block l={l} are not available")
    return np.stack([-transport(first.u, first.dudt, first.dudx, n, l * n + i)
                     for i in range(n)])


def incompressible_residuals(first: FirstDerivs, second: SecondDerivs, rho0: float):
    """Pressure Poisson defect and the constraint on the second block.

    ``pressure = Lap p + rho0 sum_{i,k} d_i u_k d_k u_i``;
    ``constraint = sum_k d_k^2 u_{n+k} + sum_{i,k} d_i u_k d_k u_i``.
    """
    n = first.n
    q = sum(first.dudx[k, i] * first.dudx[i, k] for i in range(n) for k in range(n))
    pressure = second.laplacian_p + rho0 * q
    constraint = sum(second.d2udx2[n + k, k, k] for k in range(n)) + q
    return pressure, constraint


def burgers_residuals(first: FirstDerivs, second: SecondDerivs, params: MediumParams):
    """``(d_i u_{n+i} - nu Lap u_i,  d_t u_i + u.grad u_i + nu Lap u_i)``."""
    n = first.n
    constraint = np.stack([first.dudx[n + i, i] - params.nu * second.laplacian(i)
                           for i in range(n)])
    burgers = np.stack([transport(first.u, first.dudt, first.dudx, n, i)
                        + params.nu * second.laplacian(i) for i in range(n)])
    return constraint, burgers


# {{{ f-space forms on the hodograph manifold

def inverse_derivatives(sys: FunSystem, u, t: float):
    """``A^{-1}`` and ``dA^{-1}/du_m = -A^{-1} (dA/du_m) A^{-1}`` stacked over ``m``.

    ``(dA/du_m)_{jk} = d2 f_j / du_k du_m``; ``t`` enters ``A`` only linearly
    and drops out of the u-derivatives.
    """
    A = assemble_A(sys, u, t)
    if A.singular:
        raise BlowupLocusError()
    inv = A.inverse
    H = sys.hessian(u)  # H[j, k, m]
    dA = np.moveaxis(H, 2, 0)  # dA[m, j, k]
    dinv = -np.einsum("ij,mjk,kl->mil", inv, dA, inv)
    return inv, dinv


def _dx_of_inverse(inv, dinv, r, s, k):
    """x_k-derivative of ``(A^{-1})_{rs}`` along the manifold."""
    return float(np.dot(dinv[:, r, s], inv[:, k]))


def f_constraint_ns_residual(sys: FunSystem, u, t: float, rho: float, grad_p,
                             params: MediumParams) -> np.ndarray:
    """Navier-Stokes constraint in terms of ``f`` (sums over ``m`` truncated at ``Nn``).

    ``r_i = rho (A^{-1})_{n+i,i} + eta sum_k d_{x_k}(A^{-1})_{ik}
    + (xi + eta/3) sum_k d_{x_i}(A^{-1})_{kk} - d_i p``; this is ``rho`` times
    the x-space defect of the NS constraint.
    """
    n = sys.n
    if sys.N < 2:
        raise ValueError("the NS constraint needs at least two blocks (N >= 2)")
    _check_rho(rho)
    grad_p = np.broadcast_to(np.asarray(grad_p, dtype=float), (n,))
    inv, dinv = inverse_derivatives(sys, u, t)
    r = np.empty(n)
    for i in range(n):
        lap = sum(_dx_of_inverse(inv, dinv, i, k, k) for k in range(n))
        gdiv = sum(_dx_of_inverse(inv, dinv, k, k, i) for k in range(n))
        r[i] = rho * inv[n + i, i] + params.eta * lap + params.bulk * gdiv - grad_p[i]
    return r


def f_constraint_incompressible_residual(sys: FunSystem, u, t: float) -> float:
    """``sum_k d_{x_k}(A^{-1})_{n+k,k} + sum_{i,k} (A^{-1})_{ki}(A^{-1})_{ik}``.

    This is the incompressible constraint pulled back through
    ``d_{x_k} u_j = (A^{-1})_{jk}``, so the first block index is ``n+k``.
    """
    n = sys.n
    if sys.N < 2:
        raise ValueError("needs N >= 2")
    inv, dinv = inverse_derivatives(sys, u, t)
    lhs = sum(_dx_of_inverse(inv, dinv, n + k, k, k) for k in range(n))
    q = sum(inv[k, i] * inv[i, k] for i in range(n) for k in range(n))
    return float(lhs + q)


def f_constraint_burgers_residual(sys: FunSystem, u, t: float, nu: float) -> np.ndarray:
    """``(A^{-1})_{n+i,i} - nu sum_k d_{x_k}(A^{-1})_{ik}``."""
    n = sys.n
    if sys.N < 2:
        raise ValueError("needs N >= 2")
    inv, dinv = inverse_derivatives(sys, u, t)
    return np.array([inv[n + i, i] - nu * sum(_dx_of_inverse(inv, dinv, i, k, k)
                                              for k in range(n)) for i in range(n)])

# }}}


def derivs_from_grid(grid: FieldGrid) -> tuple[FirstDerivs, SecondDerivs]:
    """Difference a sampled grid (with optional ``rho``/``p``) into derivative bundles."""
    dudt, dudx = grid_first_derivatives(grid)
    first = FirstDerivs(grid.values, dudt, dudx)
    n = grid.n
    kw = {}
    if grid.rho is not None:
        kw.update(rho=grid.rho, drho_dt=ddt(grid, grid.rho),
                  drho_dx=np.stack([ddx(grid, grid.rho, k) for k in range(n)]))
    if grid.p is not None:
        gp = np.stack([ddx(grid, grid.p, k) for k in range(n)])
        kw.update(grad_p=gp, laplacian_p=sum(ddx(grid, gp[k], k) for k in range(n)))
    return first, SecondDerivs(grid_second_derivatives(grid), **kw)
