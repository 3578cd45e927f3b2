import numpy as np
import pytest

from jordanflow.epsilon import characteristics_solution
from jordanflow.fields import FieldGrid
from jordanflow.hodograph import FunSystem
from jordanflow.jordan import (
    chain_residuals, constraint_residual_A, euler_residual, integrate_jordan,
    jordan_residual_grid,
)
from jordanflow.mol import BlowupError, CFLError, integrate
from jordanflow.scenarios import observed_orders


def _xt_grid(fun, nx, nt, n=1, x_lo=-1.0, x_hi=1.0, t_lo=1.0, t_hi=2.0):
    x = [np.linspace(x_lo, x_hi, nx) for _ in range(n)]
    t = np.linspace(t_lo, t_hi, nt)
    coords = np.meshgrid(t, *x, indexing="ij")
    vals = np.stack(fun(*coords))
    return FieldGrid(n, vals.shape[0] // n, x, t, vals)


def test_pointwise_exact_n2():
    for x, t in [(0.3, 0.2), (-1.0, 1.5)]:
        u = np.array([-t, x + t ** 2 / 2])
        dudt = np.array([-1.0, t])
        dudx = np.array([[0.0], [1.0]])
        np.testing.assert_array_equal(chain_residuals(u, dudt, dudx, 1, 2), 0.0)


def test_pointwise_scale_invariant_and_zero():
    x, t, c = 0.7, 1.3, 0.2
    u = np.array([(x - c) / t])
    r = chain_residuals(u, np.array([-(x - c) / t ** 2]), np.array([[1 / t]]), 1, 1)
    assert abs(r[0]) < 1e-16
    z = np.zeros(4)
    np.testing.assert_array_equal(chain_residuals(z, z, np.zeros((4, 2)), 2, 2), 0.0)


def test_chain_mode_needs_two_blocks():
    with pytest.raises(ValueError):
        chain_residuals(np.zeros(1), np.zeros(1), np.zeros((1, 1)), 1)


def test_grid_residual_exact_on_quadratic_solution():
    g = _xt_grid(lambda t, x: [-t + 0 * x, x + t ** 2 / 2], 21, 21, t_lo=0.0, t_hi=1.0)
    assert jordan_residual_grid(g, 2).linf <= 1e-12


def test_grid_residual_second_order_for_rational_solution():
    errs = [euler_residual(_xt_grid(lambda t, x: [(x - 0.3) / t], m, m)).linf
            for m in (21, 41, 81)]
    assert np.all((observed_orders(errs) > 1.8) & (observed_orders(errs) < 2.2))


def test_euler_2d_rational_solution():
    c = (0.1, -0.2)
    errs = []
    for m in (11, 21, 41):
        g = _xt_grid(lambda t, x1, x2: [(x1 - c[0]) / t, (x2 - c[1]) / t], m, m, n=2)
        rep = euler_residual(g)
        assert rep.labels() == ["euler[i=1]", "euler[i=2]"]
        errs.append(rep.linf)
    assert np.all(observed_orders(errs) > 1.8)


def test_constant_fields_zero_residual():
    g = _xt_grid(lambda t, x: [0 * x + 1.0, 0 * x - 2.0, 0 * x + 3.0], 5, 5)
    assert jordan_residual_grid(g).linf == 0.0
    assert jordan_residual_grid(g, 3).linf == 0.0


def test_constraint_on_and_off_manifold():
    s = FunSystem.from_strings(1, 2, ["u1^2/2 + u2", "u1"])
    np.testing.assert_allclose(constraint_residual_A(s, [-1.0, 1.5], 1.0), [0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(constraint_residual_A(s, [-1.0, 1.5], 5.0), [0.0, -4.0], atol=1e-14)
    assert constraint_residual_A(FunSystem.from_strings(1, 1, ["-u1"]), [0.2], 0.5).size == 0


def _periodic(nx, fields):
    x = np.arange(nx) / nx
    vals = np.stack([f(x) for f in fields])[:, None, :]
    return FieldGrid(1, len(fields), [x], [0.0], vals, periodic=True)


@pytest.mark.parametrize("scheme", ["upwind1", "laxwendroff2"])
def test_integrator_preserves_constants_and_zero(scheme):
    g = _periodic(32, [lambda x: 0 * x + 0.4, lambda x: 0 * x - 1.0])
    out = integrate_jordan(g, 2, 0.5, 0.01, scheme)
    np.testing.assert_array_equal(out.values, np.broadcast_to(g.values, out.values.shape))
    z = integrate_jordan(_periodic(16, [lambda x: 0 * x, lambda x: 0 * x]), 2, 0.3, 0.01, scheme)
    assert not np.any(z.values)


def test_integrator_n1_matches_characteristics():
    # u_t + u u_x = 0 with u0 = 0.1 sin(2 pi x), smooth until t = 1/(0.2 pi)
    errs = []
    k = 2 * np.pi
    for nx in (100, 200, 400):
        g = _periodic(nx, [lambda x: 0.1 * np.sin(k * x)])
        out = integrate_jordan(g, 1, 1.0, 4.0 / nx, "laxwendroff2")
        exact = characteristics_solution(lambda z: 0.1 * np.sin(k * z),
                                         lambda z: 0.1 * k * np.cos(k * z), g.x[0], 1.0, 1.0,
                                         period=1.0)
        errs.append(np.abs(out.values[0, -1] - exact).max())
    assert np.all(observed_orders(errs) > 1.8)


def test_integrator_n2_self_consistency():
    # u1(x,0) = 0, u2(x,0) = 0.1 sin(2 pi x): grid residual of the output is O(h^2)
    res = []
    for nx in (64, 128, 256):
        g = _periodic(nx, [lambda x: 0 * x, lambda x: 0.1 * np.sin(2 * np.pi * x)])
        out = integrate_jordan(g, 2, 0.2, 0.4 / nx, "laxwendroff2")
        res.append(jordan_residual_grid(out, 2).linf)
    assert np.all(observed_orders(res) > 1.7)


def test_integrator_errors():
    g = _periodic(50, [lambda x: 0 * x + 1.0])
    with pytest.raises(CFLError):
        integrate_jordan(g, 1, 1.0, 0.5)
    with pytest.raises(ValueError):
        integrate_jordan(g, 2, 1.0, 0.01)
    with pytest.raises(ValueError, match="unknown scheme"):
        integrate_jordan(g, 1, 1.0, 0.01, "rk4")


def test_blowup_detector():
    # u' = u^2 with u0 = 1 + sin/2 leaves every bound near t = 2/3
    x = np.arange(64) / 64
    U0 = (1 + 0.5 * np.sin(2 * np.pi * x))[None]
    with pytest.raises(BlowupError, match="blow-up detected") as info:
        integrate(U0, 0.0, 2.0, 1e-3, [1 / 64], lambda U, D, k: -U ** 2,
                  lambda U, k: np.zeros_like(U), "upwind1")
    assert 0.6 < info.value.t < 0.75
