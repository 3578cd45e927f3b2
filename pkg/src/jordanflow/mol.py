"""Periodic finite-difference time stepping for quasi-linear systems.

Systems have the non-conservative form

    dU/dt + sum_k T_k(U, dU/dx_k) = 0,

where each ``T_k`` is linear in its second argument. Directions are
Strang-split; a sweep along one axis is either first-order upwind or the
two-step (Richtmyer) Lax-Wendroff scheme.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

CFL_MAX = 0.9
GRADIENT_LIMIT = 1e6

Tendency = Callable[[np.ndarray, np.ndarray, int], np.ndarray]
Speeds = Callable[[np.ndarray, int], np.ndarray]

SCHEMES = ("upwind1", "laxwendroff2")


class CFLError(ValueError):
    pass


class BlowupError(ArithmeticError):
    def __init__(self, t: float, detail: str = ""):
        super().__init__(f"blow-up detected at t={t:.17g}" + (f" ({detail})" if detail else ""))
        self.t = t


def _sweep_upwind(U, dt, h, axis, k, tendency, speeds):
    back = (U - np.roll(U, 1, axis)) / h
    fwd = (np.roll(U, -1, axis) - U) / h
    s = speeds(U, k)
    D = np.where(s > 0, back, np.where(s < 0, fwd, 0.5 * (back + fwd)))
    return U - dt * tendency(U, D, k)


def _sweep_lw(U, dt, h, axis, k, tendency, speeds):
    Up = np.roll(U, -1, axis)
    mid = 0.5 * (U + Up)
    half = mid - 0.5 * dt * tendency(mid, (Up - U) / h, k)  # at x_{j+1/2}, t + dt/2
    hm = np.roll(half, 1, axis)
    return U - dt * tendency(0.5 * (half + hm), (half - hm) / h, k)


def step(U: np.ndarray, dt: float, h: list[float], tendency: Tendency, speeds: Speeds,
         scheme: str) -> np.ndarray:
    """One Strang-split time step of size ``dt`` (``U`` is ``(C, *space)``)."""
    sweep = {"upwind1": _sweep_upwind, "laxwendroff2": _sweep_lw}[scheme]
    n = len(h)
    if n == 1:
        return sweep(U, dt, h[0], 1, 0, tendency, speeds)
    order = list(range(n - 1))
    for k in order:
        U = sweep(U, 0.5 * dt, h[k], 1 + k, k, tendency, speeds)
    U = sweep(U, dt, h[n - 1], n, n - 1, tendency, speeds)
    for k in reversed(order):
        U = sweep(U, 0.5 * dt, h[k], 1 + k, k, tendency, speeds)
    return U


def cfl_number(U, dt, h, speeds) -> float:
    return max(dt * float(np.abs(speeds(U, k)).max()) / h[k] for k in range(len(h)))


def integrate(U0: np.ndarray, t0: float, t_end: float, dt: float, h: list[float],
              tendency: Tendency, speeds: Speeds, scheme: str):
    """Advance ``U0`` to ``t_end`` with a uniform step no larger than ``dt``.

    Returns ``(t, frames)`` with ``frames[j]`` the state at ``t[j]``.
    Raises :class:`CFLError` when a step violates ``CFL <= 0.9`` and
    :class:`BlowupError` on non-finite values or ``|dU/dx| > 1e6``.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if dt <= 0 or t_end < t0:
        raise ValueError("need dt > 0 and t_end >= t0")
    nsteps = max(1, math.ceil((t_end - t0) / dt - 1e-9)) if t_end > t0 else 0
    dt_eff = (t_end - t0) / nsteps if nsteps else 0.0
    t = t0 + dt_eff * np.arange(nsteps + 1)
    frames = np.empty((nsteps + 1,) + U0.shape)
    frames[0] = U = np.array(U0, dtype=float)
    for j in range(nsteps):
        c = cfl_number(U, dt_eff, h, speeds)
        if c > CFL_MAX:
            raise CFLError(f"CFL violation at step {j + 1} (t={t[j]:.6g}): "
                           f"CFL={c:.4g} > {CFL_MAX}")
        U = step(U, dt_eff, h, tendency, speeds, scheme)
        if not np.all(np.isfinite(U)):
            raise BlowupError(float(t[j + 1]), "non-finite values")
        grad = max(float(np.abs(np.diff(U, axis=1 + k)).max()) / h[k] for k in range(len(h)))
        if grad > GRADIENT_LIMIT:
            raise BlowupError(float(t[j + 1]), f"max |du/dx| = {grad:.3g}")
        frames[j + 1] = U
    return t, frames
