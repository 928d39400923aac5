import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvtopo.fields import (
    CurvatureSettings,
    curvature_adjoint,
    grad_norm_eps,
    mean_curvature,
    projection_matrix_apply,
)
from curvtopo.grid import gradient, make_grid


def test_grad_norm_eps_values():
    assert grad_norm_eps(np.zeros((2, 3, 3)), 1e-20) == pytest.approx(np.full((3, 3), 1e-20), rel=1e-12)
    g = np.array([3.0, 4.0]).reshape(2, 1)
    assert grad_norm_eps(g, 1e-20)[0] == pytest.approx(5.0)
    assert grad_norm_eps(np.zeros((2, 1)), 1.0)[0] == pytest.approx(1.0)


def test_grad_norm_eps_does_not_underflow():
    # squaring 1e-20 directly would give 1e-40, still fine, but 1e-200 would vanish
    assert grad_norm_eps(np.full((2, 2), 1e-200), 1e-200).min() > 0


def test_settings_validation():
    with pytest.raises(ValueError):
        CurvatureSettings(epsilon=0.0)
    assert CurvatureSettings().bound(make_grid(2, 256)) == pytest.approx(256)


@pytest.mark.parametrize("dim,n", [(2, 128), (3, 64)])
def test_radial_curvature_oracle(dim, n):
    g = make_grid(dim, n)
    x = g.centers()
    r2 = sum(xi**2 for xi in x)
    kappa, unclipped = mean_curvature(0.5 * r2, g, return_mask=True)
    r = np.sqrt(r2)
    sel = (r >= 5 * g.h) & (r <= 0.5 - 2 * g.h)
    rel = np.abs(kappa[sel] - (dim - 1) / r[sel]) / ((dim - 1) / r[sel])
    assert rel.max() <= 0.05
    assert np.abs(kappa).max() <= 1 / g.h


def test_planar_field_has_zero_curvature():
    g = make_grid(2, 32)
    x, y = g.centers()
    assert np.allclose(mean_curvature(2 * x - y, g), 0.0, atol=1e-9)


def test_clamp_replaces_large_values():
    g = make_grid(2, 256)
    x, y = g.centers()
    # a point source makes the curvature of its iso-lines exceed 1/h next to it
    u = np.sqrt(x**2 + y**2 + 1e-12)
    kappa, unclipped = mean_curvature(u, g, return_mask=True)
    assert not unclipped.all()
    assert np.abs(kappa).max() == pytest.approx(256)


def test_clamp_override():
    g = make_grid(2, 32)
    x, y = g.centers()
    kappa = mean_curvature(0.5 * (x**2 + y**2), g, CurvatureSettings(clamp=3.0))
    assert kappa.max() == pytest.approx(3.0)


def test_curvature_adjoint_is_transpose_of_linearization():
    g = make_grid(2, 24)
    x, y = g.centers()
    rng = np.random.default_rng(0)
    u = np.cos(2 * x) * np.exp(y) + 0.3 * x * y
    phi = rng.standard_normal(g.shape)
    du = rng.standard_normal(g.shape)
    t = 1e-6
    lin = (mean_curvature(u + t * du, g) - mean_curvature(u - t * du, g)) / (2 * t)
    lhs = np.vdot(phi, lin)
    rhs = np.vdot(du, curvature_adjoint(u, phi, g))
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_curvature_adjoint_zero_on_clipped_cells():
    g = make_grid(2, 64)
    x, y = g.centers()
    u = np.sqrt(x**2 + y**2 + 1e-12)
    _, unclipped = mean_curvature(u, g, return_mask=True)
    phi = np.where(unclipped, 0.0, 1.0)
    assert np.allclose(curvature_adjoint(u, phi, g), 0.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_projection_is_tangential_and_idempotent(seed):
    rng = np.random.default_rng(seed)
    gvec = rng.standard_normal((3, 5, 5, 5))
    v = rng.standard_normal((3, 5, 5, 5))
    w = projection_matrix_apply(gvec, v)
    assert np.abs(np.sum(w * gvec, axis=0)).max() <= 1e-10 * np.abs(v).max() * np.abs(gvec).max()
    assert np.allclose(projection_matrix_apply(gvec, w), w)


def test_projection_kills_normal_component():
    g = make_grid(2, 16)
    x, y = g.centers()
    grad = gradient(x + 2 * y, g)
    assert np.allclose(projection_matrix_apply(grad, grad), 0.0, atol=1e-12)
