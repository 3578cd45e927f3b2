"""Randomized substitution-identity harness.

Every check builds random polynomial fields in ``(x, t)``, takes exact
symbolic derivatives and compares two algebraically equivalent routes
pointwise. Nothing here solves a PDE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .epsilon import (
    EpsilonSystem, chain_identity_defect, eps_burgers_constraint_residual,
    eps_ns_constraint_residual, eps_residual,
)
from .expr import Const, Expr
from .jordan import chain_residuals
from .polyfields import Poly, SymbolicFields
from .reductions import (
    FirstDerivs, MediumParams, SecondDerivs, burgers_residuals, chain_l0_with_ns_closure,
    ns_constraint_residual, ns_residual,
)

__all__ = ["IdentityRecord", "run_identities", "ns_identity", "burgers_identity",
           "eps_chain_identity", "eps_ns_identity", "eps_burgers_identity"]

TOLERANCE = 1e-12


@dataclass
class IdentityRecord:
    name: str
    sets: int
    max_defect: float
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_defect <= self.tolerance


def _points(rng, n, count, half=1.0, tmax=1.0):
    x = rng.uniform(-half, half, size=(count, n))
    t = rng.uniform(0.0, tmax, size=(count, 1))
    return np.hstack([x, t])


def _bundle(fields: SymbolicFields, pts):
    return fields.values(pts), fields.dt(pts), fields.dx(pts), fields.dxx(pts)


def _medium(rng):
    return MediumParams(eta=float(rng.uniform(0, 1)), xi=float(rng.uniform(-1, 1)),
                        nu=float(rng.uniform(-1, 1)))


def ns_identity(rng, n: int, npts: int = 20) -> float:
    """rho * (first chain equation with the NS closure) - NS residual."""
    u = SymbolicFields.random(rng, n, 2 * n)
    scal = SymbolicFields.random(rng, n, 2)  # rho - 2, p
    pts = _points(rng, n, npts)
    uu, ut, ux, uxx = _bundle(u, pts)
    rho = 2.0 + scal.values(pts)[0]
    rho_t, rho_x = scal.dt(pts)[0], scal.dx(pts)[0]
    p_x, p_xx = scal.dx(pts)[1], scal.dxx(pts)[1]
    first = FirstDerivs(uu, ut, ux)
    second = SecondDerivs(uxx, rho=rho, drho_dt=rho_t, drho_dx=rho_x, grad_p=p_x,
                          laplacian_p=sum(p_xx[k, k] for k in range(n)))
    params = _medium(rng)
    lhs = rho * chain_l0_with_ns_closure(first, second, params)
    rhs = ns_residual(first, second, params)
    # the unclosed chain equation differs from NS by rho times the constraint defect
    full = rho * chain_residuals(uu, ut, ux, n)[:n]
    extra = full - rhs - rho * ns_constraint_residual(first, second, params)
    return float(max(np.abs(lhs - rhs).max(), np.abs(extra).max()))


def burgers_identity(rng, n: int, npts: int = 20) -> float:
    """Burgers residual vs the (unclosed) first chain equation on constructed fields.

    ``u_{n+i}`` is built by integrating ``nu Lap u_i`` in ``x_i`` so that the
    Burgers constraint holds exactly.
    """
    d = n + 1
    params = _medium(rng)
    base = [Poly.random(rng, d, 3, 5, coef=0.5) for _ in range(n)]
    second_block = []
    for i in range(n):
        lap = Poly(d, {})
        for k in range(1, n + 1):
            lap = lap + base[i].derivative(k).derivative(k)
        second_block.append(lap.scale(params.nu).antiderivative(i + 1))
    fields = SymbolicFields(n, [p.to_expr() for p in base + second_block])
    pts = _points(rng, n, npts)
    uu, ut, ux, uxx = _bundle(fields, pts)
    first = FirstDerivs(uu, ut, ux)
    second = SecondDerivs(uxx)
    constraint, burgers = burgers_residuals(first, second, params)
    chain = chain_residuals(uu, ut, ux, n)[:n]
    return float(max(np.abs(burgers - chain).max(), np.abs(constraint).max()))


def _random_eps(rng, n, M):
    return EpsilonSystem(n, M, rng.choice([-1.0, 1.0], size=(n, M)) * rng.uniform(0.5, 1.0, (n, M)))


def _random_V(rng, n, M):
    # |V| stays below ~1 on the sampling box, keeping high powers O(1)
    return SymbolicFields(n, [Const(float(rng.uniform(-0.5, 0.5))) +
                              SymbolicFields.random(rng, n, 1, degree=3, nterms=4,
                                                    coef=0.15).exprs[0]
                              for _ in range(n * M)])


def _V_arrays(V: SymbolicFields, n, M, pts):
    P = len(pts)
    vv, vt, vx, vxx = _bundle(V, pts)
    return (vv.reshape(n, M, P), vt.reshape(n, M, P), vx.reshape(n, M, n, P),
            vxx.reshape(n, M, n, n, P))


def _power_sum_exprs(es, V: SymbolicFields, l):
    n, M = es.n, es.M
    q = l * n + 1
    out = []
    for i in range(n):
        e: Expr = Const(0.0)
        for a in range(M):
            e = e + Const(es.eps[i, a] / q) * V.exprs[i * M + a] ** q
        out.append(e)
    return out


def eps_chain_identity(rng, n: int, M: int, lmax: int = 6, npts: int = 20) -> float:
    """Chain residual of power sums minus the weighted eps residual, two routes.

    Route 1 is :func:`chain_identity_defect` (chain rule on V derivatives).
    Route 2 differentiates the power-sum expressions symbolically.
    """
    es = _random_eps(rng, n, M)
    V = _random_V(rng, n, M)
    pts = _points(rng, n, npts, half=0.5, tmax=0.5)
    v, vt, vx, _ = _V_arrays(V, n, M, pts)
    r = eps_residual(es, v, vt, vx)
    worst = 0.0
    u0 = SymbolicFields(n, _power_sum_exprs(es, V, 0)).values(pts)
    for l in range(lmax + 1):
        for i in range(n):
            worst = max(worst, float(np.abs(chain_identity_defect(es, v, vt, vx, l, i)).max()))
        cur = SymbolicFields(n, _power_sum_exprs(es, V, l))
        nxt = SymbolicFields(n, _power_sum_exprs(es, V, l + 1))
        ct, cx, nx = cur.dt(pts), cur.dx(pts), nxt.dx(pts)
        for i in range(n):
            chain = ct[i] + sum(u0[k] * cx[i, k] for k in range(n)) + nx[i, i]
            weighted = (es.eps[i][:, None] * v[i] ** (l * n) * r[i]).sum(axis=0)
            worst = max(worst, float(np.abs(chain - weighted).max()))
    return worst


def _power_map_first_second(es, V, pts):
    n = es.n
    u = SymbolicFields(n, _power_sum_exprs(es, V, 0) + _power_sum_exprs(es, V, 1))
    uu, ut, ux, uxx = _bundle(u, pts)
    return FirstDerivs(uu, ut, ux), uxx


def eps_ns_identity(rng, n: int, M: int, npts: int = 20) -> float:
    """eps-form NS constraint vs rho times the x-space defect under the power-sum map."""
    es = _random_eps(rng, n, M)
    V = _random_V(rng, n, M)
    scal = SymbolicFields.random(rng, n, 2)
    pts = _points(rng, n, npts, half=0.5, tmax=0.5)
    v, _, vx, vxx = _V_arrays(V, n, M, pts)
    rho = 2.0 + scal.values(pts)[0]
    grad_p = scal.dx(pts)[1]
    params = _medium(rng)
    first, uxx = _power_map_first_second(es, V, pts)
    ref = rho * ns_constraint_residual(first, SecondDerivs(uxx, rho=rho, grad_p=grad_p), params)
    got = eps_ns_constraint_residual(es, v, vx, vxx, rho, grad_p, params)
    return float(np.abs(got - ref).max())


def eps_burgers_identity(rng, n: int, M: int, npts: int = 20) -> float:
    es = _random_eps(rng, n, M)
    V = _random_V(rng, n, M)
    pts = _points(rng, n, npts, half=0.5, tmax=0.5)
    v, _, vx, vxx = _V_arrays(V, n, M, pts)
    nu = float(rng.uniform(-1, 1))
    first, uxx = _power_map_first_second(es, V, pts)
    ref, _ = burgers_residuals(first, SecondDerivs(uxx), MediumParams(nu=nu))
    got = eps_burgers_constraint_residual(es, v, vx, vxx, nu)
    return float(np.abs(got - ref).max())


def run_identities(seed: int = 42, sets: int = 50, lmax: int = 6) -> list[IdentityRecord]:
    """All identity families over ``sets`` random field sets each (n, M in 1..3)."""
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(["ns", "burgers", "eps_chain", "eps_ns", "eps_burgers"], 0.0)
    for _ in range(sets):
        n = int(rng.integers(1, 4))
        M = int(rng.integers(1, 4))
        worst["ns"] = max(worst["ns"], ns_identity(rng, n))
        worst["burgers"] = max(worst["burgers"], burgers_identity(rng, n))
        worst["eps_chain"] = max(worst["eps_chain"], eps_chain_identity(rng, n, M, lmax))
        worst["eps_ns"] = max(worst["eps_ns"], eps_ns_identity(rng, n, M))
        worst["eps_burgers"] = max(worst["eps_burgers"], eps_burgers_identity(rng, n, M))
    return [IdentityRecord(k, sets, v) for k, v in worst.items()]
