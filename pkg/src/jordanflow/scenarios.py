"""Reusable verification scenarios: initial data builders and convergence studies.

Shared by the CLI presets and the test-suite so both exercise the same setup.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .epsilon import (
    EpsilonSystem, characteristics_solution, eps_residual_grid, integrate_eps,
    power_sum_fields,
)
from .fields import FieldGrid
from .hodograph import FunSystem, solve_hodograph
from .jordan import integrate_jordan, jordan_residual_grid

__all__ = [
    "smooth_step", "window", "SineSeries", "hodograph_slice", "travelling_wave_system",
    "travelling_wave_exact", "ConvergenceStudy", "jordan_crossval", "eps_characteristics_study",
    "observed_orders", "hodograph_grid",
]


def smooth_step(z):
    """C-infinity step: 0 for z <= 0, 1 for z >= 1."""
    z = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        a = np.where(z > 0, np.exp(-1.0 / np.where(z > 0, z, 1.0)), 0.0)
        b = np.where(z < 1, np.exp(-1.0 / np.where(z < 1, 1.0 - z, 1.0)), 0.0)
    return a / (a + b)


def window(x, rise: Sequence[float], fall: Sequence[float]):
    """Smooth bump: ramps 0 -> 1 over ``rise = (a, b)`` and 1 -> 0 over ``fall``."""
    (a, b), (c, d) = rise, fall
    return smooth_step((x - a) / (b - a)) * (1.0 - smooth_step((x - c) / (d - c)))


@dataclass
class SineSeries:
    """``constant + sum_j amp_j sin(2 pi k_j . (x - origin) / period + phase_j)``."""

    constant: float
    amplitudes: np.ndarray
    wavenumbers: np.ndarray  # (J, n)
    phases: np.ndarray
    origin: np.ndarray
    period: np.ndarray

    @classmethod
    def from_dict(cls, entry: dict, origin, period) -> "SineSeries":
        terms = entry.get("terms", [])
        n = len(origin)
        return cls(float(entry.get("constant", 0.0)),
                   np.array([float(tm["amplitude"]) for tm in terms]),
                   np.array([tm["wavenumber"] for tm in terms], dtype=float).reshape(-1, n),
                   np.array([float(tm.get("phase", 0.0)) for tm in terms]),
                   np.asarray(origin, dtype=float), np.asarray(period, dtype=float))

    def _arg(self, coords):
        s = [(2 * np.pi / self.period[k]) * (coords[k] - self.origin[k])
             for k in range(len(self.origin))]
        return [sum(w[k] * s[k] for k in range(len(s))) + ph
                for w, ph in zip(self.wavenumbers, self.phases)]

    def __call__(self, *coords):
        out = self.constant + 0.0 * coords[0]
        for a, arg in zip(self.amplitudes, self._arg(coords)):
            out = out + a * np.sin(arg)
        return out

    def derivative(self, k: int, *coords):
        """d/dx_k with 0-based ``k``."""
        out = 0.0 * coords[0]
        scale = 2 * np.pi / self.period[k]
        for a, w, arg in zip(self.amplitudes, self.wavenumbers, self._arg(coords)):
            out = out + a * w[k] * scale * np.cos(arg)
        return out


def hodograph_slice(sys: FunSystem, x_axes: Sequence[np.ndarray], t: float, u_guess=None,
                    tol: float = 1e-12, max_iter: int = 50) -> np.ndarray:
    """Solve on a tensor grid at one time, sweeping nodes in order with warm starts.

    ``u_guess`` is an optional callable ``(x) -> u`` for per-node starting
    values; otherwise the previous node's solution is reused. Returns
    ``(Nn, *shape)``; raises ``ArithmeticError`` if any node fails.
    """
    shape = tuple(len(a) for a in x_axes)
    out = np.empty((sys.dim,) + shape)
    prev = None
    for idx in np.ndindex(*shape):
        x = np.array([x_axes[k][idx[k]] for k in range(len(shape))])
        u0 = u_guess(x) if u_guess is not None else prev
        r = solve_hodograph(sys, x, t, u0, tol, max_iter)
        if not r.converged:
            raise ArithmeticError(f"hodograph solve failed at x={x.tolist()}, t={t} ({r.reason})")
        out[(slice(None),) + idx] = r.u
        prev = r.u
    return out


def hodograph_grid(sys: FunSystem, x_axes: Sequence[np.ndarray], t_axis, u0=None,
                   tol: float = 1e-12, max_iter: int = 50, solve=None):
    """Per-node solves on a ``(t, x_1 .. x_n)`` lattice with continuation warm starts.

    Each node starts from the converged value at the same ``x`` one time level
    earlier, else from its converged neighbour at the same time, else from
    ``u0`` (or the default guess). ``solve(x, t, start)`` replaces the plain
    hodograph solve (e.g. for the mixed form). Returns ``(values (Nn, nt,
    *shape), converged mask, iterations, residual norms, Jacobian det)``.
    """
    if solve is None:
        def solve(x, t, start):
            return solve_hodograph(sys, x, t, start, tol, max_iter)
    t_axis = np.atleast_1d(np.asarray(t_axis, dtype=float))
    shape = (len(t_axis),) + tuple(len(a) for a in x_axes)
    values = np.full((sys.dim,) + shape, np.nan)
    ok = np.zeros(shape, dtype=bool)
    its = np.zeros(shape, dtype=int)
    norms = np.full(shape, np.nan)
    dets = np.full(shape, np.nan)
    for idx in np.ndindex(*shape):
        j, xi = idx[0], idx[1:]
        x = np.array([x_axes[k][xi[k]] for k in range(len(xi))])
        start = None
        if j > 0 and ok[(j - 1,) + xi]:
            start = values[(slice(None), j - 1) + xi]
        else:
            for k in range(len(xi)):
                if xi[k] > 0:
                    nb = (j,) + xi[:k] + (xi[k] - 1,) + xi[k + 1:]
                    if ok[nb]:
                        start = values[(slice(None),) + nb]
                        break
        if start is None and u0 is not None:
            start = np.asarray(u0, dtype=float)
        r = solve(x, float(t_axis[j]), start)
        its[idx], norms[idx], dets[idx] = r.iterations, r.residual_norm, r.det
        if r.converged:
            ok[idx] = True
            values[(slice(None),) + idx] = r.u
    return values, ok, its, norms, dets


# {{{ exact N=2, n=1 travelling wave family

def travelling_wave_system() -> FunSystem:
    """Cubic N=2 family whose solution depends on ``x + t`` only through ``u1``.

    Satisfies the Jordan constraints identically, and has an explicit solution
    (see :func:`travelling_wave_exact`) used as a warm start.
    """
    return FunSystem.from_strings(1, 2, ["u1^2/2 + u2 + u1^3/6 + u1*u2",
                                         "u1 + u1^2/2 + u2"])


def travelling_wave_exact(x, t):
    u1 = -1.0 + np.cbrt(1.0 - 3.0 * (np.asarray(x, dtype=float) + t))
    return np.array([u1, -t - u1 - u1 ** 2 / 2])

# }}}


def observed_orders(errors: Sequence[float]) -> np.ndarray:
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


@dataclass
class ConvergenceStudy:
    nodes: list[int]
    errors: list[float]
    extra: dict

    @property
    def orders(self) -> np.ndarray:
        return observed_orders(self.errors)


def jordan_crossval(nodes: Sequence[int] = (400, 800, 1600, 3200), t_end: float = 0.25,
                    courant: float = 0.5, scheme: str = "laxwendroff2") -> ConvergenceStudy:
    """Integrator vs per-point hodograph solutions for the travelling-wave family.

    The hodograph slice at ``t = 0`` is kept on ``[-1.2, -0.2]`` and blended
    smoothly over ``[-2.2, -1.2]`` and ``[-0.2, 0]`` into the constant state
    it takes at ``x = -0.2``, so the data is periodic on ``[-3.5, 0.5)``. The
    constant matches the slower right end; blending towards the left end
    instead triggers a gradient catastrophe in the ramp before ``t = 0.25``.
    On the window ``[-0.95, -0.25]`` the domain of dependence stays inside the
    unblended region up to ``t_end``, so the exact solution there is the
    hodograph solution at ``t_end``.
    """
    sys = travelling_wave_system()
    lo, length = -3.5, 4.0
    const = travelling_wave_exact(-0.2, 0.0)
    errors, residuals = [], []
    for nx in nodes:
        h = length / nx
        x = lo + h * np.arange(nx)
        w = window(x, (-2.2, -1.2), (-0.2, 0.0))
        U = np.tile(const[:, None], (1, nx))
        inside = np.nonzero(w > 0)[0]
        slice0 = hodograph_slice(sys, [x[inside]], 0.0,
                                 u_guess=lambda xx: travelling_wave_exact(xx[0], 0.0))
        U[:, inside] = w[inside] * slice0 + (1 - w[inside]) * const[:, None]
        grid = FieldGrid(1, 2, [x], [0.0], U[:, None, :], periodic=True)
        out = integrate_jordan(grid, 2, t_end, courant * h, scheme)
        sel = np.nonzero((x >= -0.95) & (x <= -0.25))[0]
        err = 0.0
        for j in sel:
            r = solve_hodograph(sys, [x[j]], t_end, out.values[:, -1, j])
            if not r.converged:
                raise ArithmeticError(f"reference solve failed at x={x[j]}")
            err = max(err, float(np.abs(r.u - out.values[:, -1, j]).max()))
        errors.append(err)
        residuals.append(jordan_residual_grid(out, 2).linf)
    return ConvergenceStudy(list(nodes), errors, {"grid_residual": residuals})


def eps_characteristics_study(nodes: Sequence[int] = (100, 200, 400, 800),
                              amplitude: float = 0.05, t_end: float = 0.5,
                              courant: float = 0.5, blocks: int = 5) -> ConvergenceStudy:
    """Single-family eps-system (n = M = 1, eps = 1) against the characteristics oracle.

    Also records, per resolution, the L-infinity grid residual of ``V`` and
    the worst truncated chain residual of its power sums (``blocks`` levels).
    """
    es = EpsilonSystem(1, 1, [[1.0]])
    k = 2 * np.pi

    def V0(x):
        return amplitude * np.sin(k * x)

    def dV0(x):
        return amplitude * k * np.cos(k * x)

    errors, v_res, chain_res = [], [], []
    for nx in nodes:
        h = 1.0 / nx
        x = h * np.arange(nx)
        grid = FieldGrid(1, 1, [x], [0.0], V0(x)[None, None, :], periodic=True)
        # max speed is 2 * amplitude
        out = integrate_eps(es, grid, t_end, courant * h / (2 * amplitude), "upwind1")
        exact = characteristics_solution(V0, dV0, x, t_end, 2.0, period=1.0)
        errors.append(float(np.abs(out.V.values[0, -1] - exact).max()))
        v_res.append(eps_residual_grid(out).linf)
        U = power_sum_fields(es, out.V_array(), blocks)
        pgrid = FieldGrid(1, blocks, [x], out.V.t, U, periodic=True)
        chain_res.append(jordan_residual_grid(pgrid).linf)
    return ConvergenceStudy(list(nodes), errors, {"v_residual": v_res, "chain_residual": chain_res})
