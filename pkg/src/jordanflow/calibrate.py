"""Collocation least-squares fitting of parametric hodograph families.

Constraint residuals are evaluated only at converged hodograph solves, i.e.
on the solution manifold for the current parameters; ``A`` contains ``t``
explicitly and off-manifold evaluation is meaningless.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .expr import Expr, parse, substitute
from .fields import format_float
from .hodograph import FunSystem, default_u0, field_derivatives, solve_hodograph
from .jordan import constraint_residual_A, jordan_residual_point
from .reductions import MediumParams, f_constraint_ns_residual

log = logging.getLogger(__name__)

__all__ = [
    "ParametricFamily", "CollocationSet", "CalibrationResult", "NoFeasibleProbesError",
    "calibration_objective", "residual_vector", "calibrate", "certificate",
    "FAILED_PROBE_PENALTY",
]

FAILED_PROBE_PENALTY = 1e3


class NoFeasibleProbesError(RuntimeError):
    def __init__(self):
        super().__init__("no-feasible-probes")


@dataclass
class ParametricFamily:
    """Templates for ``f_1 .. f_{Nn}`` mixing ``u1 .. ud`` with named parameters."""

    n: int
    N: int
    templates: Sequence[str]
    params: Sequence[str]
    bounds: Sequence[tuple[float, float]] | None = None
    _exprs: list[Expr] = field(init=False, repr=False)

    def __post_init__(self):
        d = self.n * self.N
        if len(self.templates) != d:
            raise ValueError(f"expected {d} templates, got {len(self.templates)}")
        names = [f"u{j}" for j in range(1, d + 1)] + list(self.params)
        if len(set(names)) != len(names):
            raise ValueError("parameter names clash with variables or repeat")
        self._exprs = [parse(s, names=names) for s in self.templates]

    @property
    def size(self) -> int:
        return len(self.params)

    def system(self, theta) -> FunSystem:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,) or not np.all(np.isfinite(theta)):
            raise ValueError("theta must be a finite vector with one entry per parameter")
        d = self.n * self.N
        mapping = {d + j + 1: float(v) for j, v in enumerate(theta)}
        return FunSystem(self.n, self.N, tuple(substitute(e, mapping) for e in self._exprs))

    def clip(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if self.bounds is None:
            return theta
        lo, hi = np.array(self.bounds, dtype=float).T
        return np.clip(theta, lo, hi)


@dataclass
class CollocationSet:
    """Probe points ``(x_1 .. x_n, t)`` with optional Newton warm starts."""

    points: np.ndarray
    warm_starts: list | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    def __len__(self):
        return len(self.points)

    @classmethod
    def from_box(cls, lower, upper, count: int, skip: int = 1) -> "CollocationSet":
        """Deterministic Halton points in the box ``[lower, upper]`` (last axis is t)."""
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        sampler = qmc.Halton(d=len(lower), scramble=False)
        pts = sampler.random(count + skip)[skip:]
        return cls(qmc.scale(pts, lower, upper))

    def reordered(self, perm) -> "CollocationSet":
        ws = None if self.warm_starts is None else [self.warm_starts[i] for i in perm]
        return CollocationSet(self.points[perm], ws)


def _probe_residual(sys: FunSystem, x, t, u0, which, medium, rho, grad_p):
    res = solve_hodograph(sys, x, t, u0)
    if not res.converged:
        return None, res
    if which == "jordan":
        return constraint_residual_A(sys, res.u, t), res
    if which == "ns":
        return f_constraint_ns_residual(sys, res.u, t, rho, grad_p, medium), res
    raise ValueError(f"unknown constraint set {which!r}")


def residual_vector(fam: ParametricFamily, theta, probes: CollocationSet,
                    which: str = "jordan", medium: MediumParams | None = None,
                    rho: float = 1.0, grad_p=0.0):
    """Stacked per-probe residuals and the number of failed probes.

    A failed probe contributes a block whose squared norm is the fixed
    penalty, so ``|R|^2 / len(probes)`` is the calibration objective.
    """
    if len(probes) == 0:
        raise ValueError("probe set is empty")
    sys = fam.system(theta)
    medium = medium or MediumParams()
    n = fam.n
    width = sys.dim if which == "jordan" else n
    blocks = []
    failed = 0
    for j, pt in enumerate(probes.points):
        x, t = pt[:n], float(pt[n])
        u0 = probes.warm_starts[j] if probes.warm_starts is not None else None
        try:
            r, _ = _probe_residual(sys, x, t, u0, which, medium, rho, grad_p)
        except ArithmeticError:
            r = None
        if r is None or not np.all(np.isfinite(r)):
            failed += 1
            r = np.zeros(width)
            r[0] = np.sqrt(FAILED_PROBE_PENALTY)
        blocks.append(r)
    if failed == len(probes):
        raise NoFeasibleProbesError()
    return np.concatenate(blocks), failed


def calibration_objective(fam: ParametricFamily, theta, probes: CollocationSet,
                          which: str = "jordan", **kw) -> float:
    R, _ = residual_vector(fam, theta, probes, which, **kw)
    return float(R @ R) / len(probes)


@dataclass
class CalibrationResult:
    theta: np.ndarray
    objective: float
    history: list[tuple[int, float, np.ndarray]]
    lm_theta: np.ndarray
    lm_objective: float
    column_norms: np.ndarray
    redundant: list[int]
    nullity: int
    projected: bool
    reason: str

    def trace_to_csv(self, path, param_names: Sequence[str]) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "objective", *param_names])
            for it, obj, th in self.history:
                w.writerow([it, format_float(obj), *map(format_float, th)])


def _fd_jacobian(fun, theta, R0, central=False):
    P = len(theta)
    cols = []
    for j in range(P):
        h = 1e-6 * max(1.0, abs(theta[j]))
        e = np.zeros(P)
        e[j] = h
        if central:
            cols.append((fun(theta + e) - fun(theta - e)) / (2 * h))
        else:
            cols.append((fun(theta + e) - R0) / h)
    return np.column_stack(cols)


def calibrate(fam: ParametricFamily, theta0, probes: CollocationSet, tol: float = 1e-20,
              max_iter: int = 100, which: str = "jordan", min_change: bool = True,
              **kw) -> CalibrationResult:
    """Levenberg-Marquardt on the stacked collocation residuals.

    Forward-difference Jacobian (step ``1e-6 * max(1, |theta_j|)``), damping
    starting at 1e-3 and scaled by 10 on rejection / acceptance. Stops when
    the objective reaches ``tol``, the step norm drops below 1e-12 or after
    ``max_iter`` iterations. The accepted-step objective history is
    non-increasing.

    When the fitted residual is rank deficient the zero set is a manifold
    rather than a point. With ``min_change=True`` the LM result is then moved
    along that manifold to the point nearest ``theta0`` (a minimum-norm
    Gauss-Newton iteration with central-difference Jacobians); coordinates the
    data cannot determine are thereby left as close to their starting values
    as possible.
    """
    theta = fam.clip(np.asarray(theta0, dtype=float))
    P = len(probes)

    def fun(th):
        return residual_vector(fam, fam.clip(th), probes, which, **kw)[0]

    R = fun(theta)
    obj = float(R @ R) / P
    if not np.isfinite(obj):
        raise ValueError("objective is not finite at theta0")
    history = [(0, obj, theta.copy())]
    lam = 1e-3
    reason = "max-iter"
    J = None
    for it in range(1, max_iter + 1):
        if obj <= tol:
            reason = "tolerance"
            break
        J = _fd_jacobian(fun, theta, R)
        H = J.T @ J
        g = J.T @ R
        scale = max(float(np.trace(H)) / len(theta), 1e-300)
        accepted = False
        while lam < 1e16:
            delta = np.linalg.solve(H + lam * scale * np.eye(len(theta)), -g)
            if np.linalg.norm(delta) <= 1e-12:
                break
            trial = fam.clip(theta + delta)
            try:
                Rt = fun(trial)
                obj_t = float(Rt @ Rt) / P
            except (ArithmeticError, RuntimeError):
                obj_t = np.inf
            if obj_t < obj:
                theta, R, obj = trial, Rt, obj_t
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            reason = "small-step"
            break
        history.append((it, obj, theta.copy()))
        log.debug("LM iter %d objective %.3e", it, obj)
    else:
        if obj <= tol:
            reason = "tolerance"

    lm_theta, lm_obj = theta.copy(), obj
    Jc = _fd_jacobian(fun, theta, R, central=True)
    col = np.linalg.norm(Jc, axis=0)
    redundant = [j for j in range(len(theta)) if col[j] <= 1e-8 * max(col.max(), 1e-300)]
    sv = np.linalg.svd(Jc, compute_uv=False)
    rank = int(np.sum(sv > 1e-8 * max(sv.max(initial=0.0), 1e-300)))
    nullity = len(theta) - rank

    projected = False
    if min_change and nullity > 0 and obj <= max(tol, 1e-16):
        th = theta.copy()
        t0 = np.asarray(theta0, dtype=float)
        for _ in range(20):
            Rp = fun(th)
            Jp = _fd_jacobian(fun, th, Rp, central=True)
            Jpinv = np.linalg.pinv(Jp, rcond=1e-8)
            new = th - Jpinv @ Rp - (np.eye(len(th)) - Jpinv @ Jp) @ (th - t0)
            if np.linalg.norm(new - th) <= 1e-15 * max(1.0, np.linalg.norm(th)):
                th = new
                break
            th = fam.clip(new)
        Rp = fun(th)
        obj_p = float(Rp @ Rp) / P
        if obj_p <= max(tol, lm_obj, 1e-28):
            theta, obj, projected = th, obj_p, True

    return CalibrationResult(theta, obj, history, lm_theta, lm_obj, col, redundant,
                             nullity, projected, reason)


def certificate(fam: ParametricFamily, theta, probes: CollocationSet) -> dict:
    """Analytic Jordan-system residuals of the fitted family at fresh probes."""
    sys = fam.system(theta)
    n = fam.n
    worst = 0.0
    converged = 0
    for pt in probes.points:
        x, t = pt[:n], float(pt[n])
        res = solve_hodograph(sys, x, t, default_u0(sys, x, t))
        if not res.converged:
            continue
        converged += 1
        d = field_derivatives(sys, res.u, t)
        worst = max(worst, float(np.abs(jordan_residual_point(d, res.u, n, fam.N)).max()))
    return {"probes": len(probes), "converged": converged, "max_jordan_residual": worst}
