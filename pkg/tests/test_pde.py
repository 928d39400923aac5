import numpy as np
import pytest
import scipy.sparse.linalg as spla

from curvtopo.grid import make_grid
from curvtopo.mgsolve import assemble
from curvtopo.pde import (
    ADJOINT_SIGN,
    DiffusionSystem,
    Material,
    flux_pairing,
    simp_conductivity,
    simp_derivative,
    solve_adjoint,
    solve_direct,
)


def test_simp_end_points_and_derivative():
    mat = Material(10.0, 1.0, 3.0)
    w = np.array([0.0, 0.5, 1.0])
    assert np.allclose(simp_conductivity(w, mat), [1.0, 1.0 + 9 / 8, 10.0])
    t = 1e-6
    fd = (simp_conductivity(w[1:2] + t, mat) - simp_conductivity(w[1:2] - t, mat)) / (2 * t)
    assert simp_derivative(w[1:2], mat) == pytest.approx(fd, rel=1e-8)
    assert np.allclose(simp_derivative(w, Material(2.0, 1.0, 1.0)), 1.0)


@pytest.mark.parametrize("kw", [dict(k_alpha=1.0, k_beta=1.0), dict(k_alpha=2.0, k_beta=0.0),
                                dict(k_alpha=2.0, k_beta=1.0, q=0.5)])
def test_material_validation(kw):
    with pytest.raises(ValueError):
        Material(**kw)


def test_design_outside_box_rejected():
    g = make_grid(2, 8)
    with pytest.raises(ValueError):
        DiffusionSystem(np.full(g.shape, 1.2), Material(), g)


def test_direct_solve_matches_sparse_reference():
    g = make_grid(2, 32)
    rng = np.random.default_rng(0)
    w = rng.random(g.shape)
    mat = Material(10.0, 1.0, 3.0)
    src = np.ones(g.shape)
    st = solve_direct(w, src, mat, g)
    A = assemble(simp_conductivity(w, mat), g).to_sparse().tocsc()
    ref = spla.spsolve(A, src.ravel()).reshape(g.shape)
    assert st.converged
    assert np.allclose(st.u, ref, rtol=1e-8, atol=1e-12)


def test_positive_source_gives_positive_state():
    g = make_grid(2, 32)
    u = solve_direct(np.full(g.shape, 0.5), np.ones(g.shape), Material(), g).u
    assert u.min() > 0


def test_state_decreases_when_conductivity_increases():
    g = make_grid(2, 32)
    src = np.ones(g.shape)
    lo = solve_direct(np.full(g.shape, 0.3), src, Material(), g).u
    hi = solve_direct(np.full(g.shape, 0.7), src, Material(), g).u
    assert np.all(hi < lo)


def test_boundary_value():
    g = make_grid(2, 16)
    u = solve_direct(np.full(g.shape, 0.5), np.zeros(g.shape), Material(), g, u0=2.0).u
    assert np.allclose(u, 2.0)


def test_adjoint_sign_and_self_adjointness():
    g = make_grid(2, 32)
    w = np.random.default_rng(1).random(g.shape)
    mat = Material(4.0, 1.0, 2.0)
    src = np.cos(np.pi * g.centers()[0])
    u = solve_direct(w, src, mat, g).u
    # div(k grad p) = -h with h = g reproduces the state equation, so p = u
    p = solve_adjoint(w, src, mat, g, sign=-1).p
    assert ADJOINT_SIGN == -1
    assert np.allclose(p, u, atol=1e-9 * abs(u).max())
    assert np.allclose(solve_adjoint(w, src, mat, g, sign=1).p, -u, atol=1e-9 * abs(u).max())


def test_shared_system_reuses_hierarchy():
    g = make_grid(2, 32)
    w = np.full(g.shape, 0.5)
    system = DiffusionSystem(w, Material(), g)
    a = solve_direct(w, np.ones(g.shape), Material(), g, system=system)
    b = solve_direct(w, np.ones(g.shape), Material(), g)
    assert np.array_equal(a.u, b.u)


def test_flux_pairing_is_derivative_of_the_residual_pairing():
    g = make_grid(2, 16)
    rng = np.random.default_rng(2)
    mat = Material(5.0, 1.0, 3.0)
    w = 0.2 + 0.6 * rng.random(g.shape)
    u = rng.standard_normal(g.shape)
    p = rng.standard_normal(g.shape)
    u0 = 0.7
    dw = rng.standard_normal(g.shape)

    def pairing(wv):
        op = assemble(simp_conductivity(wv, mat), g, u0)
        return np.vdot(p, op.apply(u) - op.boundary_rhs())

    t = 1e-6
    fd = (pairing(w + t * dw) - pairing(w - t * dw)) / (2 * t)
    assert np.vdot(flux_pairing(w, u, p, mat, g, u0), dw) == pytest.approx(fd, rel=1e-6)


def test_three_dimensional_solve():
    g = make_grid(3, 16)
    st = solve_direct(np.full(g.shape, 0.5), np.ones(g.shape), Material(), g)
    assert st.converged and st.u.min() > 0
