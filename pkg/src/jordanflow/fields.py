"""Sampled space-time fields, grid differencing and residual reports."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "FieldGrid", "ResidualEntry", "ResidualReport",
    "grid_first_derivatives", "grid_second_derivatives", "ddx", "ddt",
    "format_float",
]


def format_float(v: float) -> str:
    return format(float(v), ".17g")


@dataclass
class FieldGrid:
    """Fields ``u_1 .. u_{Kn}`` on a uniform ``(t, x_1 .. x_n)`` lattice.

    ``values`` has shape ``(K*n, len(t), len(x_1), ..., len(x_n))``; optional
    ``rho`` and ``p`` have the same shape without the leading component axis.
    With ``periodic=True`` the spatial axes are a periodic lattice whose last
    node is one spacing short of the period.
    """

    n: int
    K: int
    x: list[np.ndarray]
    t: np.ndarray
    values: np.ndarray
    rho: np.ndarray | None = None
    p: np.ndarray | None = None
    periodic: bool = False
    labels: list[str] | None = None  # column names for the components

    def __post_init__(self):
        self.x = [np.asarray(a, dtype=float) for a in self.x]
        self.t = np.atleast_1d(np.asarray(self.t, dtype=float))
        self.values = np.asarray(self.values, dtype=float)
        if len(self.x) != self.n:
            raise ValueError("need one coordinate array per spatial dimension")
        shape = (len(self.t),) + tuple(len(a) for a in self.x)
        if self.values.shape != (self.K * self.n,) + shape:
            raise ValueError(f"values shape {self.values.shape} does not match "
                             f"{(self.K * self.n,) + shape}")
        for name in ("rho", "p"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.asarray(arr, dtype=float)
                if arr.shape != shape:
                    raise ValueError(f"{name} shape {arr.shape} does not match {shape}")
                setattr(self, name, arr)
        if self.labels is not None and len(self.labels) != self.K * self.n:
            raise ValueError("need one label per component")
        for a in self.x + ([self.t] if len(self.t) > 1 else []):
            if len(a) > 1:
                d = np.diff(a)
                if np.any(d <= 0) or not np.allclose(d, d[0], rtol=1e-9, atol=0):
                    raise ValueError("axes must be uniformly increasing")

    @property
    def h(self) -> list[float]:
        return [float(a[1] - a[0]) for a in self.x]

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else float("nan")

    @property
    def node_shape(self) -> tuple[int, ...]:
        return self.values.shape[1:]

    def coordinates(self) -> list[np.ndarray]:
        """Broadcast coordinate arrays ``[t, x_1, ..., x_n]`` over the node set."""
        return list(np.meshgrid(self.t, *self.x, indexing="ij"))

    def slice_time(self, k: int) -> "FieldGrid":
        sel = slice(k, k + 1)
        return FieldGrid(self.n, self.K, self.x, self.t[sel], self.values[:, sel],
                         None if self.rho is None else self.rho[sel],
                         None if self.p is None else self.p[sel], self.periodic, self.labels)

    # {{{ serialization

    def header(self) -> dict:
        return {
            "n": self.n,
            "K": self.K,
            "periodic": self.periodic,
            "axes": {
                "t": {"min": float(self.t[0]), "max": float(self.t[-1]), "count": len(self.t)},
                **{f"x{k + 1}": {"min": float(a[0]), "max": float(a[-1]), "count": len(a)}
                   for k, a in enumerate(self.x)},
            },
            "fields": self.field_names(),
        }

    def field_names(self) -> list[str]:
        names = (list(self.labels) if self.labels is not None
                 else [f"u{j}" for j in range(1, self.K * self.n + 1)])
        if self.rho is not None:
            names.append("rho")
        if self.p is not None:
            names.append("p")
        return names

    def to_csv(self, path) -> None:
        """One row per node: ``x1..xn, t, u1..u_{Kn}[, rho][, p]``; JSON header alongside."""
        path = Path(path)
        coords = self.coordinates()
        cols = [c.ravel() for c in coords[1:]] + [coords[0].ravel()]
        cols += [v.ravel() for v in self.values]
        if self.rho is not None:
            cols.append(self.rho.ravel())
        if self.p is not None:
            cols.append(self.p.ravel())
        names = [f"x{k + 1}" for k in range(self.n)] + ["t"] + self.field_names()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names)
            for row in zip(*cols):
                w.writerow([format_float(v) for v in row])
        with open(path.with_suffix(".json"), "w") as fh:
            json.dump(self.header(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, path) -> "FieldGrid":
        path = Path(path)
        with open(path.with_suffix(".json")) as fh:
            hdr = json.load(fh)
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n, K = hdr["n"], hdr["K"]
        axes = hdr["axes"]
        t = np.linspace(axes["t"]["min"], axes["t"]["max"], axes["t"]["count"])
        x = [np.linspace(axes[f"x{k}"]["min"], axes[f"x{k}"]["max"], axes[f"x{k}"]["count"])
             for k in range(1, n + 1)]
        shape = (len(t),) + tuple(len(a) for a in x)
        fields_ = data[:, n + 1:]
        values = np.stack([fields_[:, j].reshape(shape) for j in range(K * n)])
        extra = hdr["fields"][K * n:]
        rho = fields_[:, K * n + extra.index("rho")].reshape(shape) if "rho" in extra else None
        p = fields_[:, K * n + extra.index("p")].reshape(shape) if "p" in extra else None
        labels = hdr["fields"][: K * n]
        default = [f"u{j}" for j in range(1, K * n + 1)]
        return cls(n, K, x, t, values, rho, p, hdr.get("periodic", False),
                   None if labels == default else labels)

    # }}}


# {{{ differencing

def _derivative(arr: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(arr, -1, axis) - np.roll(arr, 1, axis)) / (2.0 * h)
    if arr.shape[axis] < 3:
        raise ValueError("at least 3 nodes per differentiated axis are required")
    # second-order central inside, second-order one-sided at the ends
    return np.gradient(arr, h, axis=axis, edge_order=2)


def ddt(grid: FieldGrid, arr: np.ndarray) -> np.ndarray:
    """Time derivative of a node-shaped (or component-leading) array."""
    axis = arr.ndim - grid.n - 1
    return _derivative(arr, grid.dt, axis, False)


def ddx(grid: FieldGrid, arr: np.ndarray, k: int) -> np.ndarray:
    """Derivative along ``x_{k+1}`` (``k`` is 0-based)."""
    axis = arr.ndim - grid.n + k
    return _derivative(arr, grid.h[k], axis, grid.periodic)


def grid_first_derivatives(grid: FieldGrid):
    """``(dudt, dudx)`` with shapes ``(C, *nodes)`` and ``(C, n, *nodes)``."""
    u = grid.values
    dudt = ddt(grid, u)
    dudx = np.stack([ddx(grid, u, k) for k in range(grid.n)], axis=1)
    return dudt, dudx


def grid_second_derivatives(grid: FieldGrid, arr: np.ndarray | None = None) -> np.ndarray:
    """Spatial Hessian ``(C, n, n, *nodes)`` by successive differencing."""
    u = grid.values if arr is None else arr
    first = [ddx(grid, u, k) for k in range(grid.n)]
    rows = []
    for k in range(grid.n):
        rows.append(np.stack([ddx(grid, first[k], m) for m in range(grid.n)], axis=1))
    out = np.stack(rows, axis=1)
    # symmetrize the mixed partials; both orders are second accurate
    return 0.5 * (out + np.swapaxes(out, 1, 2))

# }}}


@dataclass
class ResidualEntry:
    label: str
    linf: float
    l2: float
    argmax: tuple[int, ...]


@dataclass
class ResidualReport:
    entries: list[ResidualEntry] = field(default_factory=list)

    @classmethod
    def from_arrays(cls, labels: Sequence[str], arrays) -> "ResidualReport":
        rep = cls()
        for label, arr in zip(labels, arrays):
            rep.add(label, arr)
        return rep

    def add(self, label: str, arr) -> None:
        a = np.abs(np.asarray(arr, dtype=float))
        if a.size == 0:
            raise ValueError(f"empty residual for {label}")
        flat = int(np.argmax(a))
        idx = tuple(int(i) for i in np.unravel_index(flat, a.shape)) if a.ndim else ()
        self.entries.append(ResidualEntry(label, float(a.max()),
                                          float(np.sqrt(np.mean(a ** 2))), idx))

    def extend(self, other: "ResidualReport") -> "ResidualReport":
        self.entries.extend(other.entries)
        return self

    @property
    def linf(self) -> float:
        return max((e.linf for e in self.entries), default=0.0)

    def __getitem__(self, label: str) -> ResidualEntry:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)

    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["equation", "linf", "l2", "argmax"])
            for e in self.entries:
                w.writerow([e.label, format_float(e.linf), format_float(e.l2),
                            ";".join(map(str, e.argmax))])
