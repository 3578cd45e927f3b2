import numpy as np
import pytest

from jordanflow.fields import (
    FieldGrid, ResidualReport, ddt, ddx, format_float, grid_first_derivatives,
    grid_second_derivatives,
)


def _grid(f, nx=21, nt=11, periodic=False, n=1):
    x = [np.linspace(-1, 1, nx) if not periodic else np.arange(nx) / nx for _ in range(n)]
    t = np.linspace(1, 2, nt)
    coords = np.meshgrid(t, *x, indexing="ij")
    vals = np.stack(f(*coords))
    return FieldGrid(n, vals.shape[0] // n, x, t, vals, periodic=periodic)


def test_shape_validation():
    with pytest.raises(ValueError):
        FieldGrid(1, 1, [np.linspace(0, 1, 5)], np.linspace(0, 1, 3), np.zeros((1, 3, 4)))
    with pytest.raises(ValueError, match="uniform"):
        FieldGrid(1, 1, [np.array([0, 1, 3.0])], [0.0], np.zeros((1, 1, 3)))
    with pytest.raises(ValueError):
        FieldGrid(1, 1, [np.linspace(0, 1, 3)], [0.0], np.zeros((1, 1, 3)), rho=np.ones(3))


def test_differences_exact_on_quadratics():
    g = _grid(lambda t, x: [x ** 2 + 3 * x * t - t ** 2])
    dudt, dudx = grid_first_derivatives(g)
    t, x = g.coordinates()
    np.testing.assert_allclose(dudt[0], 3 * x - 2 * t, atol=1e-12)
    np.testing.assert_allclose(dudx[0, 0], 2 * x + 3 * t, atol=1e-12)


def test_central_difference_order():
    errs = []
    for nx in (41, 81):
        g = FieldGrid(1, 1, [np.arange(nx) / nx], [0.0],
                      np.sin(2 * np.pi * np.arange(nx) / nx)[None, None], periodic=True)
        exact = 2 * np.pi * np.cos(2 * np.pi * g.x[0])
        errs.append(np.abs(ddx(g, g.values[0], 0)[0] - exact).max())
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_second_derivatives_symmetric_2d():
    g = _grid(lambda t, x1, x2: [x1 ** 2 * x2, x1 * x2 ** 2 + t], nx=9, nt=3, n=2)
    d2 = grid_second_derivatives(g)
    assert d2.shape == (2, 2, 2) + g.node_shape
    np.testing.assert_array_equal(d2[:, 0, 1], d2[:, 1, 0])
    t, x1, x2 = g.coordinates()
    np.testing.assert_allclose(d2[0, 0, 1][:, 2:-2, 2:-2], 2 * x1[:, 2:-2, 2:-2], atol=1e-12)


def test_ddt_requires_three_levels():
    g = _grid(lambda t, x: [x * t], nt=2)
    with pytest.raises(ValueError):
        ddt(g, g.values[0])


def test_csv_round_trip(tmp_path):
    g = _grid(lambda t, x: [x / t, x * t], nx=5, nt=3)
    g.rho = np.ones(g.node_shape) * 1.5
    g.to_csv(tmp_path / "f.csv")
    back = FieldGrid.from_csv(tmp_path / "f.csv")
    np.testing.assert_array_equal(back.values, g.values)
    np.testing.assert_array_equal(back.rho, g.rho)
    assert back.p is None
    header = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert header == "x1,t,u1,u2,rho"


def test_csv_labels(tmp_path):
    g = FieldGrid(1, 2, [np.arange(4) / 4], [0.0], np.zeros((2, 1, 4)), periodic=True,
                  labels=["V1_1", "V1_2"])
    g.to_csv(tmp_path / "v.csv")
    assert (tmp_path / "v.csv").read_text().startswith("x1,t,V1_1,V1_2\n")
    assert FieldGrid.from_csv(tmp_path / "v.csv").labels == ["V1_1", "V1_2"]


def test_format_float_is_17_digits():
    assert format_float(0.1) == "0.10000000000000001"
    assert float(format_float(np.pi)) == np.pi


def test_residual_report(tmp_path):
    rep = ResidualReport.from_arrays(["a", "b"], [np.array([[1.0, -3.0]]), np.zeros((1, 2))])
    assert rep["a"].linf == 3.0 and rep["a"].argmax == (0, 1)
    assert rep.linf == 3.0
    assert rep.labels() == ["a", "b"]
    with pytest.raises(KeyError):
        rep["c"]
    rep.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "equation,linf,l2,argmax"
    assert lines[1].startswith("a,3,")
