import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvtopo.grid import (
    apply_axis,
    divergence,
    first_derivative_matrix,
    gradient,
    hessian,
    integrate,
    make_grid,
    second_derivative_matrix,
)


def test_grid_geometry():
    g = make_grid(2, 8)
    assert g.h == pytest.approx(1 / 8)
    assert g.shape == (8, 8)
    assert g.measure == pytest.approx(1.0)
    x, y = g.centers()
    assert x[0, 0] == pytest.approx(-0.5 + 1 / 16)
    assert np.allclose(x[:, 0], g.axis_centers(0))
    assert g.coarsen().n == 4


@pytest.mark.parametrize(
    "args",
    [dict(dim=1, n=8), dict(dim=4, n=8), dict(dim=2, n=2), dict(dim=2, n=8, box=[(0, 1), (0, 2)]),
     dict(dim=2, n=8, box=[(1, 0), (1, 0)])],
)
def test_make_grid_rejects(args):
    with pytest.raises(ValueError):
        make_grid(**args)


def test_derivatives_exact_on_polynomials():
    n, h = 16, 1 / 16
    x = -0.5 + h * (np.arange(n) + 0.5)
    d1 = first_derivative_matrix(n, h)
    d2 = second_derivative_matrix(n, h)
    # second-order one-sided ends are exact on quadratics, the 4-point ends on cubics
    assert np.allclose(d1 @ (3 * x**2 - x), 6 * x - 1, atol=1e-10)
    assert np.allclose(d2 @ (x**3 + 2 * x**2), 6 * x + 4, atol=1e-9)


def test_hessian_mixed_term_and_divergence():
    g = make_grid(2, 16)
    x, y = g.centers()
    u = x**2 * y + 0.5 * y**2
    H = hessian(u, g)
    assert np.allclose(H[0, 1], 2 * x, atol=1e-10)
    assert np.allclose(H[0, 1], H[1, 0])
    assert np.allclose(divergence(gradient(u, g), g), 2 * y + 1, atol=1e-9)


def test_integrate_region():
    g = make_grid(3, 8)
    assert integrate(np.ones(g.shape), g) == pytest.approx(1.0)
    region = np.zeros(g.shape)
    region[:4] = 1
    assert integrate(np.ones(g.shape), g, region) == pytest.approx(0.5)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(-3, 3))
def test_gradient_is_linear(seed, c):
    g = make_grid(2, 8)
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2,) + g.shape)
    assert np.allclose(gradient(u + c * v, g), gradient(u, g) + c * gradient(v, g))


def test_apply_axis_matches_dense():
    n = 6
    m = first_derivative_matrix(n, 0.1)
    u = np.arange(n * n, dtype=float).reshape(n, n) ** 1.5
    assert np.allclose(apply_axis(m, u, 1), u @ m.toarray().T)
