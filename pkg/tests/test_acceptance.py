"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Budgets are wall-clock limits for the measured block (imports and fixture
setup excluded) on a single core.
"""

import time

import numpy as np

from jordanflow.calibrate import CollocationSet, ParametricFamily, calibrate, certificate
from jordanflow.expr import diff, evaluate
from jordanflow.hodograph import (
    FunSystem, blowup_first_time, field_derivatives, hodograph_residual, solve_hodograph,
)
from jordanflow.identities import run_identities
from jordanflow.jordan import constraint_residual_A, jordan_residual_point
from jordanflow.polyfields import random_fun_system
from jordanflow.scenarios import eps_characteristics_study, jordan_crossval

from .helpers import random_rational_expr


def verdict(capsys, tag, ok, elapsed, budget, detail):
    ok = bool(ok) and elapsed < budget
    line = (f"{'PASS' if ok else 'FAIL'} {tag}: {detail}; "
            f"{elapsed:.2f} s (budget {budget:g} s)")
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


def test_c1_hodograph_round_trip(capsys):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, systems, skipped, probes = 0.0, 0, 0, 0
    while systems < 200:
        n, N = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        s = random_fun_system(rng, n, N, degree=3)
        for _ in range(40):  # draw probes until Newton converges
            x, t = rng.uniform(-1, 1, n), float(rng.uniform(0, 1))
            probes += 1
            r = solve_hodograph(s, x, t, rng.uniform(-1, 1, s.dim))
            if r.converged:
                worst = max(worst, float(np.abs(hodograph_residual(s, r.u, x, t)).max()))
                systems += 1
                break
        else:
            skipped += 1  # no reachable real root from the sampled starts
    elapsed = time.perf_counter() - start
    verdict(capsys, "C1 hodograph round-trip", worst <= 1e-10, elapsed, 10,
            f"200 systems with converged probes ({skipped} without, {probes} probes), "
            f"max residual {worst:.2e}")


def test_c2_exact_jordan_family(capsys):
    s = FunSystem.from_strings(1, 2, ["u1^2/2 + u2", "u1"])
    xs, ts = np.linspace(-1, 1, 41), np.linspace(0, 1, 41)
    start = time.perf_counter()
    jord = cons = sol = 0.0
    for t in ts:
        u = np.zeros(2)
        for x in xs:
            r = solve_hodograph(s, [x], t, u, tol=1e-13)
            assert r.converged
            u = r.u
            d = field_derivatives(s, u, t)
            jord = max(jord, float(np.abs(jordan_residual_point(d, u, 1, 2)).max()))
            cons = max(cons, float(np.abs(constraint_residual_A(s, u, t)).max()))
            sol = max(sol, float(np.abs(u - [-t, x + t * t / 2]).max()))
    elapsed = time.perf_counter() - start
    verdict(capsys, "C2 exact N=2 family", jord <= 1e-10 and cons <= 1e-10 and sol <= 1e-10,
            elapsed, 5, f"1681 points, jordan {jord:.2e}, constraint {cons:.2e}, "
                        f"closed-form error {sol:.2e}")


def test_c3_gradient_catastrophe(capsys):
    s = FunSystem.from_strings(1, 1, ["-u1"])
    start = time.perf_counter()
    times = [blowup_first_time(s, [x], (0.0, 2.0)) for x in np.linspace(-1, 1, 11)]
    elapsed = time.perf_counter() - start
    err = max(abs(ts - 1.0) if ts is not None else np.inf for ts in times)
    verdict(capsys, "C3 gradient catastrophe", err <= 1e-6, elapsed, 1,
            f"11 x values, max |t* - 1| = {err:.2e}")


def test_c4_oracle_cross_validation(capsys):
    start = time.perf_counter()
    study = jordan_crossval()
    elapsed = time.perf_counter() - start
    orders = study.orders
    verdict(capsys, "C4 integrator vs hodograph", np.all(orders >= 1.8), elapsed, 60,
            f"nodes {list(study.nodes)}, errors {[f'{e:.2e}' for e in study.errors]}, "
            f"orders {np.round(orders, 3).tolist()}")


def test_c5_substitution_identities(capsys):
    start = time.perf_counter()
    records = run_identities(seed=42, sets=50, lmax=6)
    elapsed = time.perf_counter() - start
    detail = ", ".join(f"{r.name} {r.max_defect:.1e}" for r in records)
    verdict(capsys, "C5 substitution identities",
            all(r.passed and r.tolerance <= 1e-12 for r in records), elapsed, 10,
            f"50 sets, {detail}")


def test_c6_eps_characteristics(capsys):
    start = time.perf_counter()
    study = eps_characteristics_study()
    elapsed = time.perf_counter() - start
    chain = np.array(study.extra["chain_residual"])
    vres = np.array(study.extra["v_residual"])
    ok = np.all(study.orders >= 0.8) and np.all(chain <= 3 * vres)
    verdict(capsys, "C6 eps-system characteristics", ok, elapsed, 30,
            f"orders {np.round(study.orders, 3).tolist()}, "
            f"max chain/V residual ratio {np.max(chain / vres):.3f}")


def test_c7_calibration_recovery(capsys):
    fam = ParametricFamily(1, 2, ["a*u1^2 + b*u2", "c*u1"], ["a", "b", "c"])
    box = ([-1.0, 0.2], [1.0, 0.8])
    start = time.perf_counter()
    res = calibrate(fam, [0.3, 0.8, 1.3], CollocationSet.from_box(*box, count=20))
    cert = certificate(fam, res.theta, CollocationSet.from_box(*box, count=50, skip=101))
    elapsed = time.perf_counter() - start
    err = float(np.abs(res.theta - [0.5, 1.0, 1.0]).max())
    ok = (err <= 1e-6 and res.objective <= 1e-16 and cert["converged"] == 50
          and cert["max_jordan_residual"] <= 1e-8)
    verdict(capsys, "C7 calibration recovery", ok, elapsed, 30,
            f"theta error {err:.2e}, objective {res.objective:.2e}, certificate "
            f"{cert['max_jordan_residual']:.2e} on {cert['converged']}/50 probes")


def _fd_field_derivatives(s, x, t, u, h):
    n = s.n
    cols = []
    for k in range(n + 1):
        e = np.zeros(n)
        if k < n:
            e[k] = h
        tp, tm = (t, t) if k < n else (t + h, t - h)
        a = solve_hodograph(s, x + e, tp, u, tol=1e-15)
        b = solve_hodograph(s, x - e, tm, u, tol=1e-15)
        if not (a.converged and b.converged):
            return None
        cols.append((a.u - b.u) / (2 * h))
    return np.column_stack(cols)


def test_c8_derivative_machinery(capsys):
    rng = np.random.default_rng(8)
    start = time.perf_counter()
    # symbolic diff vs central differences; a probe where the third derivative is
    # below 1e-4 (mostly: identically zero) has no measurable h^2 term and is redrawn
    ratios, redrawn = [], 0
    while len(ratios) < 100:
        e = random_rational_expr(rng, 3)
        pt = rng.uniform(-0.5, 0.5, 3)
        j = int(rng.integers(1, 4))
        if abs(evaluate(diff(diff(diff(e, j), j), j), pt)) < 1e-4:
            redrawn += 1
            continue
        exact = evaluate(diff(e, j), pt)
        errs = []
        for h in (1e-3, 5e-4):
            step = np.zeros(3)
            step[j - 1] = h
            errs.append(abs((evaluate(e, pt + step) - evaluate(e, pt - step)) / (2 * h) - exact))
        ratios.append(errs[0] / errs[1])
    # field_derivatives vs differences of solved u on random systems
    f_ratios = []
    while len(f_ratios) < 20:
        n, N = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        s = random_fun_system(rng, n, N)
        x, t = rng.uniform(-1, 1, n), float(rng.uniform(0, 1))
        r = solve_hodograph(s, x, t, rng.uniform(-1, 1, s.dim), tol=1e-15)
        if not r.converged or abs(r.det) < 0.2:
            continue
        d = field_derivatives(s, r.u, t)
        exact = np.column_stack([d.dudx, d.dudt])
        fds = [_fd_field_derivatives(s, x, t, r.u, h) for h in (1e-3, 5e-4)]
        if fds[0] is None or fds[1] is None:
            continue
        f_ratios.append(np.abs(fds[0] - exact).max() / np.abs(fds[1] - exact).max())
    elapsed = time.perf_counter() - start
    ratios, f_ratios = np.array(ratios), np.array(f_ratios)
    ok = np.all((ratios >= 3.5) & (ratios <= 4.5)) and np.all((f_ratios >= 3.5) & (f_ratios <= 4.5))
    verdict(capsys, "C8 derivative machinery", ok, elapsed, 5,
            f"expr ratios [{ratios.min():.4f}, {ratios.max():.4f}] ({redrawn} redrawn), "
            f"field ratios [{f_ratios.min():.4f}, {f_ratios.max():.4f}] on 20 systems")
