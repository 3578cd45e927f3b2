import numpy as np
import pytest

from jordanflow.epsilon import (
    EpsilonSystem, chain_identity_defect, characteristics_solution, eps_burgers_constraint_residual,
    eps_continuity_residual, eps_ns_constraint_residual, eps_residual, eps_residual_grid,
    integrate_eps, lambda_speeds, power_sum, power_sum_derivatives, power_sum_fields,
)
from jordanflow.fields import FieldGrid
from jordanflow.reductions import (
    FirstDerivs, MediumParams, SecondDerivs, burgers_residuals, continuity_residual,
    ns_constraint_residual,
)
from jordanflow.scenarios import eps_characteristics_study


def test_lambda_examples():
    es = EpsilonSystem(1, 2, [1.0, 1.0])
    np.testing.assert_array_equal(lambda_speeds(es, [[1.0, 2.0]])[0, :, 0], [4.0, 5.0])
    single = EpsilonSystem(1, 1, [1.0])
    V = np.array([[np.linspace(-1, 1, 5)]])
    np.testing.assert_array_equal(lambda_speeds(single, V)[0, 0, 0], 2 * V[0, 0])


def test_power_sum_examples():
    es = EpsilonSystem(1, 1, [1.0])
    V = np.array([[2.0]])
    assert [power_sum(es, l, 0, V) for l in range(3)] == pytest.approx([2.0, 2.0, 8 / 3])
    cancel = EpsilonSystem(1, 2, [1.0, -1.0])
    np.testing.assert_array_equal(power_sum_fields(cancel, np.array([[0.7, 0.7]]), 4), 0.0)
    with pytest.raises(ValueError):
        power_sum(es, -1, 0, V)


def test_constant_fields_are_solutions():
    es = EpsilonSystem(2, 2, [[1.0, 0.5], [-0.3, 2.0]])
    V = np.full((2, 2, 3), 0.4)
    r = eps_residual(es, V, np.zeros_like(V), np.zeros((2, 2, 2, 3)))
    np.testing.assert_array_equal(r, 0.0)


@pytest.mark.parametrize("n,M", [(1, 1), (1, 3), (2, 2), (3, 2)])
def test_chain_identity_on_arbitrary_fields(n, M):
    rng = np.random.default_rng(10 * n + M)
    es = EpsilonSystem(n, M, rng.uniform(-1, 1, (n, M)))
    nodes = (7,)
    V = rng.uniform(-1, 1, (n, M) + nodes)
    dVdt = rng.normal(size=(n, M) + nodes)
    dVdx = rng.normal(size=(n, M, n) + nodes)
    for l in range(4):
        for i in range(n):
            assert np.abs(chain_identity_defect(es, V, dVdt, dVdx, l, i)).max() < 1e-13


def test_power_sum_derivative_by_finite_difference():
    rng = np.random.default_rng(4)
    es = EpsilonSystem(2, 3, rng.uniform(-1, 1, (2, 3)))
    V = rng.uniform(0.2, 1.0, (2, 3))
    dV = rng.normal(size=(2, 3))
    h = 1e-6
    for l in range(3):
        for i in range(2):
            fd = (power_sum(es, l, i, V + h * dV) - power_sum(es, l, i, V - h * dV)) / (2 * h)
            assert power_sum_derivatives(es, V, dV, l, i) == pytest.approx(fd, rel=1e-8)


def _power_map(es, V, dVdx, d2Vdx2):
    """Power-sum fields (blocks 0, 1) and their x-derivatives by the chain rule."""
    n = es.n
    u = np.concatenate([np.stack([power_sum(es, l, i, V) for i in range(n)]) for l in (0, 1)])
    dudx = np.concatenate([np.stack([power_sum_derivatives(es, V, dVdx, l, i)
                                     for i in range(n)]) for l in (0, 1)])
    d2 = np.zeros((2 * n, n, n) + V.shape[2:])
    for i in range(n):  # block 0 is linear in V
        d2[i] = power_sum_derivatives(es, V, d2Vdx2, 0, i)
    return u, dudx, d2


@pytest.mark.parametrize("n,M", [(1, 2), (2, 2)])
def test_reduced_constraints_agree_with_power_sum_fields(n, M):
    rng = np.random.default_rng(n + 7 * M)
    es = EpsilonSystem(n, M, rng.uniform(-1, 1, (n, M)))
    nodes = (4,)
    V = rng.uniform(-1, 1, (n, M) + nodes)
    dVdx = rng.normal(size=(n, M, n) + nodes)
    d2Vdx2 = rng.normal(size=(n, M, n, n) + nodes)
    d2Vdx2 = 0.5 * (d2Vdx2 + np.swapaxes(d2Vdx2, 2, 3))
    rho, drho_dt = rng.uniform(0.5, 2.0, nodes), rng.normal(size=nodes)
    drho_dx, gp = rng.normal(size=(n,) + nodes), rng.normal(size=(n,) + nodes)
    params = MediumParams(eta=0.3, xi=0.2, nu=0.05)

    u, dudx, d2 = _power_map(es, V, dVdx, d2Vdx2)
    first = FirstDerivs(u, np.zeros_like(u), dudx)
    second = SecondDerivs(d2, rho=rho, drho_dt=drho_dt, drho_dx=drho_dx, grad_p=gp)

    np.testing.assert_allclose(eps_ns_constraint_residual(es, V, dVdx, d2Vdx2, rho, gp, params),
                               rho * ns_constraint_residual(first, second, params), atol=1e-12)
    np.testing.assert_allclose(eps_continuity_residual(es, V, dVdx, rho, drho_dt, drho_dx),
                               continuity_residual(first, second), atol=1e-12)
    want, _ = burgers_residuals(first, second, params)
    np.testing.assert_allclose(eps_burgers_constraint_residual(es, V, dVdx, d2Vdx2, params.nu),
                               want, atol=1e-12)


def test_characteristics_solution_satisfies_implicit_relation():
    k = 2 * np.pi
    V0 = lambda z: 0.05 * np.sin(k * z)
    dV0 = lambda z: 0.05 * k * np.cos(k * z)
    x = np.linspace(0, 1, 50, endpoint=False)
    t = 0.8
    V = characteristics_solution(V0, dV0, x, t, period=1.0)
    # V is constant along x - 2 t V
    np.testing.assert_allclose(V, V0(x - 2 * t * V), atol=1e-13)
    with pytest.raises(ValueError, match="characteristics cross"):
        characteristics_solution(V0, dV0, x, 3.0, period=1.0)


def _periodic(V, n, M):
    nx = V.shape[-1]
    return FieldGrid(n, M, [np.arange(nx) / nx] * n, [0.0], V[:, None], periodic=True)


@pytest.mark.parametrize("scheme", ["upwind1", "laxwendroff2"])
def test_integration_preserves_constants(scheme):
    es = EpsilonSystem(1, 2, [1.0, -0.5])
    init = _periodic(np.stack([np.full(16, 0.3), np.full(16, -0.2)]), 1, 2)
    out = integrate_eps(es, init, 0.5, 0.01, scheme)
    assert np.all(out.V.values == init.values)
    assert eps_residual_grid(out).linf == 0.0


def test_integration_rejects_wrong_shape():
    es = EpsilonSystem(1, 2, [1.0, 1.0])
    with pytest.raises(ValueError):
        integrate_eps(es, _periodic(np.zeros((1, 8)), 1, 1), 0.1, 0.01)


def test_first_order_convergence_to_characteristics():
    study = eps_characteristics_study(nodes=(100, 200, 400))
    assert np.all(study.orders > 0.8)
    assert np.all(np.array(study.extra["chain_residual"])
                  <= 3 * np.array(study.extra["v_residual"]))
