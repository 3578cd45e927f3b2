"""Command-line front end.

    jordanflow run <config.json | preset name> [--out DIR] [--seed S] [--threads T]
    jordanflow presets [NAME]

Configs are JSON, schema-validated before any computation (unknown keys are
rejected). Exit status: 0 success, 2 invalid config, 3 numerical failure
(an ``error.json`` report is written to the output directory).
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np
import scipy

from . import __version__
from .calibrate import CollocationSet, ParametricFamily, calibrate, certificate
from .epsilon import (
    EpsilonSystem, chain_identity_defect, characteristics_solution, eps_residual_grid,
    integrate_eps, power_sum_fields,
)
from .expr import ExprSyntaxError, compile_exprs, diff, parse
from .fields import FieldGrid, ResidualReport, format_float, grid_first_derivatives
from .hodograph import (
    ContinuationError, FunSystem, blowup_first_time, field_derivatives, solve_hodograph,
    solve_hodograph_mixed,
)
from .identities import run_identities
from .jordan import (
    constraint_residual_A, euler_residual, euler_residual_point, integrate_jordan,
    jordan_labels, jordan_residual_grid, jordan_residual_point,
)
from .mol import SCHEMES, CFLError
from .reductions import (
    MediumParams, f_constraint_burgers_residual, f_constraint_incompressible_residual,
    f_constraint_ns_residual,
)
from .scenarios import SineSeries, hodograph_grid, hodograph_slice, window

log = logging.getLogger("jordanflow")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
MODES = ("solve", "blowup", "integrate", "verify", "epsilon", "calibrate", "identities")
DEFAULT_SEED = 42


# {{{ schema

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int1 = {"type": "integer", "minimum": 1}
_nums = {"type": "array", "items": _num}
_strs = {"type": "array", "items": {"type": "string"}}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}


def _obj(props: dict, required: Sequence[str] = ()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


_axis = _obj({"min": _num, "max": _num, "count": _int1}, ["min", "max"])
_box = _obj({"lower": _nums, "upper": _nums, "count": _int1,
             "skip": {"type": "integer", "minimum": 0}}, ["lower", "upper", "count"])
_sine = _obj({"constant": _num,
              "terms": {"type": "array", "items": _obj(
                  {"amplitude": _num, "wavenumber": _nums, "phase": _num},
                  ["amplitude", "wavenumber"])}})

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    **_obj({
        "mode": {"enum": list(MODES)},
        "description": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "system": _obj({
            "n": _int1, "N": _int1, "M": _int1, "f": _strs, "g": _strs,
            "eps": {"type": "array", "items": _nums},
            "blocks": _int1,
        }, ["n"]),
        "grid": _obj({
            "x": {"type": "array", "items": _axis, "minItems": 1},
            "t": _axis,
            "dt": _pos,
            "periodic": {"type": "boolean"},
        }),
        "solver": _obj({
            "tol": _pos, "max_iter": _int1, "scheme": {"enum": list(SCHEMES)},
            "u0": _nums, "steps": {"type": "integer", "minimum": 2},
        }),
        "medium": _obj({"eta": _num, "xi": _num, "nu": _num,
                        "rho": {"type": "string"}, "p": {"type": "string"}}),
        "initial": _obj({
            "kind": {"enum": ["hodograph", "expressions", "sine"]},
            "t": _num,
            "fields": {"type": "array"},
            "blend": _obj({"constant": _nums,
                           "rise": {"type": "array", "items": _pair},
                           "fall": {"type": "array", "items": _pair}},
                          ["constant", "rise", "fall"]),
            "oracle_window": {"type": "array", "items": _pair},
        }, ["kind"]),
        "calibration": _obj({
            "templates": _strs, "params": _strs, "theta0": _nums,
            "bounds": {"type": "array", "items": _pair},
            "which": {"enum": ["jordan", "ns"]},
            "probes": _box, "certificate": _box,
            "tol": _pos, "max_iter": _int1, "min_change": {"type": "boolean"},
            "rho": _pos, "grad_p": _nums,
        }, ["templates", "params", "theta0", "probes"]),
        "identities": _obj({"sets": _int1, "lmax": {"type": "integer", "minimum": 0}}),
        "output": _obj({"dir": {"type": "string"}}),
    }, ["mode"]),
    "allOf": [
        {"if": {"properties": {"mode": {"const": m}}},
         "then": {"required": req}}
        for m, req in [("solve", ["system", "grid"]), ("blowup", ["system", "grid"]),
                       ("integrate", ["system", "grid", "initial"]),
                       ("verify", ["system", "grid"]),
                       ("epsilon", ["system", "grid", "initial"]),
                       ("calibrate", ["system", "calibration"])]
    ],
}


class ConfigError(ValueError):
    """Config is well-formed JSON but describes an impossible experiment."""


class NumericalFailure(RuntimeError):
    """A computation finished without a usable result."""


def validate(cfg: dict) -> None:
    v = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(map(str, e.absolute_path)) or "<root>"
        raise ConfigError(f"{where}: {e.message}")

# }}}


# {{{ config helpers

def _need(section: dict, key: str, what: str):
    if key not in section:
        raise ConfigError(f"{what} requires '{key}'")
    return section[key]


def _fun_system(cfg: dict) -> FunSystem:
    s = cfg["system"]
    n = s["n"]
    N = _need(s, "N", f"mode {cfg['mode']}")
    f = _need(s, "f", f"mode {cfg['mode']}")
    if len(f) != n * N:
        raise ConfigError(f"system.f needs {n * N} expressions, got {len(f)}")
    try:
        return FunSystem.from_strings(n, N, f)
    except ExprSyntaxError as exc:
        raise ConfigError(f"system.f: {exc}") from exc


def _axis_nodes(ax: dict, periodic: bool = False, what: str = "axis") -> np.ndarray:
    count = ax.get("count")
    if count is None:
        raise ConfigError(f"{what} requires 'count'")
    lo, hi = float(ax["min"]), float(ax["max"])
    if hi < lo or (hi == lo and count > 1):
        raise ConfigError(f"{what}: max must exceed min")
    if periodic:
        return lo + (hi - lo) * np.arange(count) / count
    return np.linspace(lo, hi, count)


def _x_axes(cfg: dict, periodic: bool = False) -> list[np.ndarray]:
    g = cfg["grid"]
    n = cfg["system"]["n"]
    axes = _need(g, "x", f"mode {cfg['mode']}")
    if len(axes) != n:
        raise ConfigError(f"grid.x needs {n} axes, got {len(axes)}")
    return [_axis_nodes(a, periodic, f"grid.x[{k}]") for k, a in enumerate(axes)]


def _t_range(cfg: dict) -> tuple[float, float]:
    t = _need(cfg["grid"], "t", f"mode {cfg['mode']}")
    if t["max"] < t["min"]:
        raise ConfigError("grid.t: max must not be below min")
    return float(t["min"]), float(t["max"])


def _solver(cfg: dict) -> dict:
    s = cfg.get("solver", {})
    return {"tol": s.get("tol", 1e-12), "max_iter": s.get("max_iter", 50),
            "scheme": s.get("scheme", "upwind1"), "u0": s.get("u0"), "steps": s.get("steps")}


def _xt_exprs(texts: Sequence[str], n: int, what: str):
    names = [f"x{k}" for k in range(1, n + 1)] + ["t"]
    try:
        return [parse(s, names=names) for s in texts]
    except ExprSyntaxError as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def _medium(cfg: dict) -> MediumParams:
    m = cfg.get("medium", {})
    return MediumParams(m.get("eta", 0.0), m.get("xi", 0.0), m.get("nu", 0.0))


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else format_float(v) for v in row) + "\n")


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")

# }}}


# {{{ modes

def _mode_solve(cfg: dict, out: Path, seed: int) -> list[str]:
    sysf = _fun_system(cfg)
    sv = _solver(cfg)
    x_axes = _x_axes(cfg)
    t_axis = _axis_nodes(cfg["grid"]["t"], what="grid.t") if "t" in cfg["grid"] else None
    if t_axis is None:
        raise ConfigError("mode solve requires grid.t")
    solve = None
    if "g" in cfg["system"]:
        g = _xt_g(cfg, sysf)

        def solve(x, t, start):
            return solve_hodograph_mixed(sysf, g, x, t, start, sv["tol"], sv["max_iter"])
    u0 = _u0(cfg, sysf)
    values, ok, its, norms, dets = hodograph_grid(sysf, x_axes, t_axis, u0, sv["tol"],
                                                  sv["max_iter"], solve)
    if not ok.any():
        raise NumericalFailure("Newton failed at every grid point")
    n, d = sysf.n, sysf.dim
    header = [f"x{k}" for k in range(1, n + 1)] + ["t"] + [f"u{j}" for j in range(1, d + 1)]
    header += ["converged", "iterations", "residual_norm", "det"]
    rows = []
    for idx in np.ndindex(*ok.shape):
        j, xi = idx[0], idx[1:]
        rows.append([x_axes[k][xi[k]] for k in range(n)] + [t_axis[j]]
                    + list(values[(slice(None),) + idx])
                    + [str(int(ok[idx])), str(int(its[idx])), norms[idx], dets[idx]])
    _write_rows(out / "solutions.csv", header, rows)
    return ["solutions.csv"]


def _xt_g(cfg: dict, sysf: FunSystem):
    d = sysf.dim
    names = [f"u{j}" for j in range(1, d + 1)]
    try:
        return [parse(s, names=names) for s in cfg["system"]["g"]]
    except ExprSyntaxError as exc:
        raise ConfigError(f"system.g: {exc}") from exc


def _u0(cfg: dict, sysf: FunSystem):
    u0 = _solver(cfg)["u0"]
    if u0 is not None and len(u0) != sysf.dim:
        raise ConfigError(f"solver.u0 needs {sysf.dim} entries")
    return u0


def _mode_blowup(cfg: dict, out: Path, seed: int) -> list[str]:
    sysf = _fun_system(cfg)
    sv = _solver(cfg)
    x_axes = _x_axes(cfg)
    t0, t1 = _t_range(cfg)
    steps = sv["steps"] or cfg["grid"]["t"].get("count", 41)
    if steps < 2:
        raise ConfigError("blow-up scan needs at least 2 time steps")
    u0 = _u0(cfg, sysf)
    n = sysf.n
    rows = []
    for idx in np.ndindex(*(len(a) for a in x_axes)):
        x = np.array([x_axes[k][idx[k]] for k in range(n)])
        try:
            ts = blowup_first_time(sysf, x, (t0, t1), u0, steps, sv["tol"], sv["max_iter"])
            status = "none" if ts is None else "fold"
        except ContinuationError as exc:
            ts, status = None, "continuation-failed"
            log.warning("x=%s: %s", x.tolist(), exc)
        rows.append(list(x) + [np.nan if ts is None else ts, status])
    _write_rows(out / "blowup.csv", [f"x{k}" for k in range(1, n + 1)] + ["t_star", "status"],
                rows)
    return ["blowup.csv"]


def _coords_at(x_axes):
    return list(np.meshgrid(*x_axes, indexing="ij"))


def _initial_fields(cfg: dict, x_axes, count: int, what: str) -> np.ndarray:
    """``(count, *shape)`` from expression or sine-series specs."""
    ini = cfg["initial"]
    fields_ = _need(ini, "fields", f"initial kind {ini['kind']}")
    if len(fields_) != count:
        raise ConfigError(f"initial.fields needs {count} entries for {what}, got {len(fields_)}")
    coords = _coords_at(x_axes)
    n = len(x_axes)
    if ini["kind"] == "expressions":
        if not all(isinstance(s, str) for s in fields_):
            raise ConfigError("initial.fields must be expression strings")
        exprs = _xt_exprs(fields_, n, "initial.fields")
        t0 = ini.get("t", 0.0)
        fn = compile_exprs(exprs, n + 1)
        vals = fn(coords + [np.full_like(coords[0], t0)])
        return np.stack([np.broadcast_to(np.asarray(v, float), coords[0].shape) for v in vals])
    return np.stack([s(*coords) for s in _sine_series(cfg, x_axes)])


def _sine_series(cfg: dict, x_axes) -> list[SineSeries]:
    ini = cfg["initial"]
    origin = [float(a["min"]) for a in cfg["grid"]["x"]]
    period = [float(a["max"]) - float(a["min"]) for a in cfg["grid"]["x"]]
    out = []
    for k, entry in enumerate(ini["fields"]):
        try:
            jsonschema.validate(entry, _sine)
        except jsonschema.ValidationError as exc:
            raise ConfigError(f"initial.fields[{k}]: {exc.message}") from exc
        for tm in entry.get("terms", []):
            if len(tm["wavenumber"]) != len(x_axes):
                raise ConfigError(f"initial.fields[{k}]: wavenumber needs {len(x_axes)} entries")
        out.append(SineSeries.from_dict(entry, origin, period))
    return out


def _periodic_grid_check(cfg: dict):
    if not cfg["grid"].get("periodic", True):
        raise ConfigError("time integration runs on periodic lattices only (grid.periodic)")
    dt = _need(cfg["grid"], "dt", f"mode {cfg['mode']}")
    return dt


def _mode_integrate(cfg: dict, out: Path, seed: int) -> list[str]:
    dt = _periodic_grid_check(cfg)
    s = cfg["system"]
    n = s["n"]
    N = _need(s, "N", "mode integrate")
    sv = _solver(cfg)
    x_axes = _x_axes(cfg, periodic=True)
    t0, t1 = _t_range(cfg)
    ini = cfg["initial"]
    sysf = None
    if ini["kind"] == "hodograph":
        sysf = _fun_system(cfg)
        U = _blended_slice(cfg, sysf, x_axes, ini.get("t", t0), sv)
    else:
        U = _initial_fields(cfg, x_axes, N * n, f"N={N}, n={n}")
    grid0 = FieldGrid(n, N, x_axes, [t0], U[:, None], periodic=True)
    grid = integrate_jordan(grid0, N, t1, dt, sv["scheme"])
    grid.to_csv(out / "fields.csv")
    rep = euler_residual(grid) if N == 1 else jordan_residual_grid(grid, N)
    rep.to_csv(out / "residuals.csv")
    written = ["fields.csv", "fields.json", "residuals.csv"]
    if "oracle_window" in ini:
        if sysf is None:
            raise ConfigError("initial.oracle_window needs initial kind 'hodograph'")
        _oracle_report(sysf, grid, ini["oracle_window"], sv).to_csv(out / "oracle.csv")
        written.append("oracle.csv")
    return written


def _blended_slice(cfg, sysf, x_axes, t, sv) -> np.ndarray:
    ini = cfg["initial"]
    blend = ini.get("blend")
    if blend is None:
        return hodograph_slice(sysf, x_axes, t, tol=sv["tol"], max_iter=sv["max_iter"])
    n = sysf.n
    if len(blend["constant"]) != sysf.dim or len(blend["rise"]) != n or len(blend["fall"]) != n:
        raise ConfigError("initial.blend needs one constant per field and one rise/fall per axis")
    coords = _coords_at(x_axes)
    w = np.ones(coords[0].shape)
    for k in range(n):
        w = w * window(coords[k], blend["rise"][k], blend["fall"][k])
    const = np.asarray(blend["constant"], dtype=float)
    U = np.broadcast_to(const.reshape((-1,) + (1,) * n), (sysf.dim,) + w.shape).copy()
    prev = _u0(cfg, sysf)
    for idx in zip(*np.nonzero(w > 0)):
        x = np.array([x_axes[k][idx[k]] for k in range(n)])
        r = solve_hodograph(sysf, x, t, prev, sv["tol"], sv["max_iter"])
        if not r.converged:
            raise NumericalFailure(f"initial hodograph solve failed at x={x.tolist()} ({r.reason})")
        prev = r.u
        U[(slice(None),) + idx] = w[idx] * r.u + (1 - w[idx]) * const
    return U


def _oracle_report(sysf, grid: FieldGrid, window_, sv) -> ResidualReport:
    n = grid.n
    if len(window_) != n:
        raise ConfigError("initial.oracle_window needs one [lo, hi] pair per axis")
    t_end = float(grid.t[-1])
    final = grid.values[:, -1]
    err = []
    for idx in np.ndindex(*grid.values.shape[2:]):
        x = np.array([grid.x[k][idx[k]] for k in range(n)])
        if not all(lo <= x[k] <= hi for k, (lo, hi) in enumerate(window_)):
            continue
        u_num = final[(slice(None),) + idx]
        r = solve_hodograph(sysf, x, t_end, u_num, sv["tol"], sv["max_iter"])
        if not r.converged:
            raise NumericalFailure(f"oracle solve failed at x={x.tolist()} ({r.reason})")
        err.append(r.u - u_num)
    if not err:
        raise ConfigError("initial.oracle_window contains no grid nodes")
    err = np.array(err).T
    return ResidualReport.from_arrays([f"oracle[u{j}]" for j in range(1, len(err) + 1)], err)


def _mode_verify(cfg: dict, out: Path, seed: int) -> list[str]:
    sysf = _fun_system(cfg)
    sv = _solver(cfg)
    x_axes = _x_axes(cfg)
    t_axis = _axis_nodes(_need(cfg["grid"], "t", "mode verify"), what="grid.t")
    values, ok, *_ = hodograph_grid(sysf, x_axes, t_axis, _u0(cfg, sysf), sv["tol"],
                                    sv["max_iter"])
    if not ok.all():
        raise NumericalFailure(f"hodograph solve failed at {int((~ok).sum())} of {ok.size} nodes")
    n, N = sysf.n, sysf.N
    med = cfg.get("medium", {})
    params = _medium(cfg)
    scal = {}
    for key in ("rho", "p"):
        if key in med:
            (e,) = _xt_exprs([med[key]], n, f"medium.{key}")
            scal[key] = e
    coords = [t_axis] + list(x_axes)

    analytic: dict[str, list] = {}

    def put(label, v):
        analytic.setdefault(label, []).append(v)

    rho_fn = compile_exprs([scal["rho"]], n + 1) if "rho" in scal else None
    gp_fn = compile_exprs([diff(scal["p"], k) for k in range(1, n + 1)], n + 1) \
        if "p" in scal else None
    for idx in np.ndindex(*ok.shape):
        t = float(t_axis[idx[0]])
        x = [float(x_axes[k][idx[1 + k]]) for k in range(n)]
        u = values[(slice(None),) + idx]
        dv = field_derivatives(sysf, u, t)
        if N == 1:
            for i, r in enumerate(euler_residual_point(dv, u, n)):
                put(f"euler[i={i + 1}]", r)
            continue
        for lab, r in zip(jordan_labels(n, N), jordan_residual_point(dv, u, n, N)):
            put(lab, r)
        for j, r in enumerate(constraint_residual_A(sysf, u, t)):
            put(f"constraint[{j + 1}]", r)
        put("incompressible_constraint", f_constraint_incompressible_residual(sysf, u, t))
        if "nu" in med:
            for i, r in enumerate(f_constraint_burgers_residual(sysf, u, t, params.nu)):
                put(f"burgers_constraint[i={i + 1}]", r)
        if rho_fn is not None and gp_fn is not None:
            rho = float(rho_fn(x + [t])[0])
            gp = np.asarray(gp_fn(x + [t]), dtype=float)
            for i, r in enumerate(f_constraint_ns_residual(sysf, u, t, rho, gp, params)):
                put(f"ns_constraint[i={i + 1}]", r)
    rep = ResidualReport()
    for lab, vals in analytic.items():
        rep.add(lab, np.array(vals).reshape(ok.shape))
    rep.to_csv(out / "analytic.csv")

    rho_g = p_g = None
    if scal:
        mesh = np.meshgrid(*coords, indexing="ij")
        args = mesh[1:] + [mesh[0]]
        if "rho" in scal:
            rho_g = np.broadcast_to(np.asarray(compile_exprs([scal["rho"]], n + 1)(args)[0],
                                               float), ok.shape)
        if "p" in scal:
            p_g = np.broadcast_to(np.asarray(compile_exprs([scal["p"]], n + 1)(args)[0],
                                             float), ok.shape)
    grid = FieldGrid(n, N, x_axes, t_axis, values, rho_g, p_g)
    grid.to_csv(out / "fields.csv")
    written = ["analytic.csv", "fields.csv", "fields.json"]
    if min(ok.shape) >= 3:
        grep = euler_residual(grid) if N == 1 else jordan_residual_grid(grid, N)
        grep.to_csv(out / "grid.csv")
        written.append("grid.csv")
    else:
        log.info("grid residuals skipped: fewer than 3 nodes on some axis")
    return written


def _mode_epsilon(cfg: dict, out: Path, seed: int) -> list[str]:
    dt = _periodic_grid_check(cfg)
    s = cfg["system"]
    n = s["n"]
    M = _need(s, "M", "mode epsilon")
    eps = np.asarray(_need(s, "eps", "mode epsilon"), dtype=float)
    if eps.shape != (n, M):
        raise ConfigError(f"system.eps must be an {n} x {M} matrix")
    K = s.get("blocks", 3)
    sv = _solver(cfg)
    x_axes = _x_axes(cfg, periodic=True)
    t0, t1 = _t_range(cfg)
    ini = cfg["initial"]
    if ini["kind"] == "hodograph":
        raise ConfigError("epsilon mode takes 'expressions' or 'sine' initial data")
    V0 = _initial_fields(cfg, x_axes, n * M, f"n={n}, M={M}")
    labels = [f"V{i + 1}_{a + 1}" for i in range(n) for a in range(M)]
    es = EpsilonSystem(n, M, eps)
    grid0 = FieldGrid(n, M, x_axes, [t0], V0[:, None], periodic=True, labels=labels)
    res = integrate_eps(es, grid0, t1, dt, sv["scheme"])
    res.V.labels = labels
    res.V.to_csv(out / "V.csv")

    V = res.V_array()
    U = power_sum_fields(es, V, K)
    pgrid = FieldGrid(n, K, x_axes, res.V.t, U, periodic=True)
    pgrid.to_csv(out / "power_sums.csv")

    rep = eps_residual_grid(res)
    if K >= 2:
        rep.extend(jordan_residual_grid(pgrid))
    dVdt, dVdx = grid_first_derivatives(res.V)
    shape = res.V.values.shape[1:]
    dVdt = dVdt.reshape((n, M) + shape)
    dVdx = dVdx.reshape((n, M, n) + shape)
    for l in range(max(K - 1, 1)):
        for i in range(n):
            rep.add(f"identity[l={l},i={i + 1}]", chain_identity_defect(es, V, dVdt, dVdx, l, i))
    rep.to_csv(out / "residuals.csv")
    written = ["V.csv", "V.json", "power_sums.csv", "power_sums.json", "residuals.csv"]

    if n == 1 and M == 1 and ini["kind"] == "sine":
        (series,) = _sine_series(cfg, x_axes)
        period = float(cfg["grid"]["x"][0]["max"]) - float(cfg["grid"]["x"][0]["min"])
        exact = characteristics_solution(lambda z: series(z), lambda z: series.derivative(0, z),
                                         x_axes[0], t1 - t0, eps[0, 0] + 1.0, period=period)
        ResidualReport.from_arrays(["oracle[V1_1]"], [res.V.values[0, -1] - exact]).to_csv(
            out / "oracle.csv")
        written.append("oracle.csv")
    return written


def _mode_calibrate(cfg: dict, out: Path, seed: int) -> list[str]:
    s, c = cfg["system"], cfg["calibration"]
    n = s["n"]
    N = _need(s, "N", "mode calibrate")
    try:
        fam = ParametricFamily(n, N, c["templates"], c["params"],
                               [tuple(b) for b in c["bounds"]] if "bounds" in c else None)
    except ExprSyntaxError as exc:
        raise ConfigError(f"calibration.templates: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"calibration: {exc}") from exc
    if len(c["theta0"]) != fam.size:
        raise ConfigError(f"calibration.theta0 needs {fam.size} entries")
    if "bounds" in c and len(c["bounds"]) != fam.size:
        raise ConfigError(f"calibration.bounds needs {fam.size} pairs")

    def box(entry, what, default_skip):
        if len(entry["lower"]) != n + 1 or len(entry["upper"]) != n + 1:
            raise ConfigError(f"{what}: lower/upper need n+1 = {n + 1} entries (x..., t)")
        return CollocationSet.from_box(entry["lower"], entry["upper"], entry["count"],
                                       entry.get("skip", default_skip))

    probes = box(c["probes"], "calibration.probes", 1)
    fresh = c.get("certificate", {**c["probes"], "count": 50})
    cert_set = box(fresh, "calibration.certificate",
                   c["probes"].get("skip", 1) + c["probes"]["count"])
    kw = {}
    if c.get("which", "jordan") == "ns":
        kw = {"medium": _medium(cfg), "rho": c.get("rho", 1.0),
              "grad_p": np.asarray(c.get("grad_p", [0.0] * n), dtype=float)}
    res = calibrate(fam, c["theta0"], probes, c.get("tol", 1e-20), c.get("max_iter", 100),
                    c.get("which", "jordan"), c.get("min_change", True), **kw)
    res.trace_to_csv(out / "trace.csv", fam.params)
    cert = certificate(fam, res.theta, cert_set)
    summary = {
        "theta": [float(v) for v in res.theta],
        "objective": res.objective,
        "lm_theta": [float(v) for v in res.lm_theta],
        "lm_objective": res.lm_objective,
        "column_norms": [float(v) for v in res.column_norms],
        "redundant": [fam.params[j] for j in res.redundant],
        "nullity": res.nullity,
        "projected": res.projected,
        "reason": res.reason,
        "certificate": cert,
    }
    _write_json(out / "calibration.json", summary)
    return ["trace.csv", "calibration.json"]


def _mode_identities(cfg: dict, out: Path, seed: int) -> list[str]:
    opts = cfg.get("identities", {})
    recs = run_identities(seed, opts.get("sets", 50), opts.get("lmax", 6))
    _write_rows(out / "identities.csv", ["name", "sets", "max_defect", "tolerance", "passed"],
                [[r.name, str(r.sets), r.max_defect, r.tolerance, str(int(r.passed))]
                 for r in recs])
    failed = [r.name for r in recs if not r.passed]
    if failed:
        raise NumericalFailure("identity checks failed: " + ", ".join(failed))
    return ["identities.csv"]


_DISPATCH = {
    "solve": _mode_solve, "blowup": _mode_blowup, "integrate": _mode_integrate,
    "verify": _mode_verify, "epsilon": _mode_epsilon, "calibrate": _mode_calibrate,
    "identities": _mode_identities,
}

# }}}


# {{{ presets and entry points

def preset_names() -> list[str]:
    root = resources.files("jordanflow") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def preset_text(name: str) -> str:
    name = name[:-5] if name.endswith(".json") else name
    if name not in preset_names():
        raise KeyError(name)
    return (resources.files("jordanflow") / "presets" / f"{name}.json").read_text()


def _load_config(ref: str) -> tuple[dict, str]:
    path = Path(ref)
    if path.is_file():
        text, stem = path.read_text(), path.stem
    else:
        try:
            text = preset_text(ref)
        except KeyError:
            raise ConfigError(f"no such config file or preset: {ref}") from None
        stem = Path(ref).stem
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg, stem


def versions() -> dict:
    return {"jordanflow": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "jsonschema": _dist_version("jsonschema"), "python": platform.python_version()}


def _dist_version(name: str) -> str:
    from importlib.metadata import PackageNotFoundError, version
    try:
        return version(name)
    except PackageNotFoundError:
        return "unknown"


def run(config: str, out: str | None = None, seed: int | None = None,
        threads: int | None = None) -> int:
    """Validate, dispatch and write outputs. Returns the process exit status."""
    try:
        cfg, stem = _load_config(config)
        validate(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    seed = seed if seed is not None else cfg.get("seed", DEFAULT_SEED)
    outdir = Path(out or cfg.get("output", {}).get("dir") or Path("out") / stem)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        with np.errstate(all="ignore"):
            written = _DISPATCH[cfg["mode"]](cfg, outdir, seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ArithmeticError, NumericalFailure, CFLError, RuntimeError, np.linalg.LinAlgError,
            ValueError) as exc:
        report = {"status": "error", "mode": cfg["mode"], "error": type(exc).__name__,
                  "message": str(exc), "versions": versions()}
        _write_json(outdir / "error.json", report)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _write_json(outdir / "run.json", {"status": "ok", "mode": cfg["mode"], "config": cfg,
                                      "seed": seed, "threads": threads, "outputs": written,
                                      "versions": versions()})
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="jordanflow",
                                 description="Hodograph solutions of Jordan systems.")
    ap.add_argument("-v", "--verbose", action="store_true")
    subs = ap.add_subparsers(dest="command", required=True)
    pr = subs.add_parser("run", help="run an experiment config")
    pr.add_argument("config", help="path to a JSON config or the name of a bundled preset")
    pr.add_argument("--out", help="output directory (default: out/<config name>)")
    pr.add_argument("--seed", type=int, help=f"RNG seed (default {DEFAULT_SEED})")
    pr.add_argument("--threads", type=int, help="accepted for compatibility; runs are serial")
    pp = subs.add_parser("presets", help="list bundled presets or print one")
    pp.add_argument("name", nargs="?")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "presets":
        if args.name is None:
            print("\n".join(preset_names()))
            return EXIT_OK
        try:
            sys.stdout.write(preset_text(args.name))
        except KeyError:
            print(f"error: unknown preset {args.name}", file=sys.stderr)
            return EXIT_INVALID
        return EXIT_OK
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    return run(args.config, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())

# }}}
