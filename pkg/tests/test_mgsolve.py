import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from curvtopo.grid import make_grid
from curvtopo.mgsolve import (
    assemble,
    build_hierarchy,
    harmonic_faces,
    mgcg_solve,
    prolong,
    restrict,
    vcycle,
)


def random_k(shape, ratio, seed=0):
    rng = np.random.default_rng(seed)
    return np.where(rng.random(shape) < 0.5, ratio, 1.0)


def test_harmonic_faces():
    k = np.array([1.0, 3.0])
    assert np.allclose(harmonic_faces(k, 0), [2.0, 1.5, 6.0])


def test_apply_matches_sparse_and_is_symmetric():
    g = make_grid(2, 16)
    op = assemble(random_k(g.shape, 10.0), g)
    A = op.to_sparse()
    x = np.random.default_rng(1).standard_normal(g.shape)
    assert np.allclose(op.apply(x).ravel(), A @ x.ravel(), rtol=1e-14, atol=1e-10)
    assert abs(A - A.T).max() < 1e-12
    assert np.allclose(op.diag.ravel(), A.diagonal())


def test_assemble_rejects_nonpositive_conductivity():
    g = make_grid(2, 8)
    k = np.ones(g.shape)
    k[3, 3] = 0.0
    with pytest.raises(ValueError):
        assemble(k, g)


@pytest.mark.parametrize("dim", [2, 3])
def test_restriction_is_scaled_transpose_of_prolongation(dim):
    rng = np.random.default_rng(dim)
    c = rng.standard_normal((4,) * dim)
    f = rng.standard_normal((8,) * dim)
    assert np.vdot(restrict(f), c) == pytest.approx(np.vdot(f, prolong(c)) / 2**dim)


def test_prolongation_preserves_constants_in_the_interior():
    p = prolong(np.ones((8, 8)))
    assert np.allclose(p[2:-2, 2:-2], 1.0)


@pytest.mark.parametrize("ratio", [1.0, 100.0])
def test_mgcg_matches_direct_solve(ratio):
    g = make_grid(2, 32)
    op = assemble(random_k(g.shape, ratio), g)
    b = np.ones(g.shape)
    res = mgcg_solve(op, b)
    ref = spla.spsolve(op.to_sparse().tocsc(), b.ravel()).reshape(g.shape)
    assert res.converged
    assert np.allclose(res.x, ref, rtol=1e-8, atol=1e-12 * abs(ref).max())


def test_manufactured_solution_converges_second_order():
    errs = []
    for n in (16, 32, 64):
        g = make_grid(2, n)
        x, y = g.centers()
        exact = np.cos(np.pi * x) * np.cos(np.pi * y)  # vanishes on the boundary
        op = assemble(np.ones(g.shape), g)
        u = mgcg_solve(op, 2 * np.pi**2 * exact).x
        errs.append(np.abs(u - exact).max())
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_iterations_are_grid_independent_for_constant_k():
    its = []
    for n in (32, 64, 128):
        g = make_grid(2, n)
        its.append(mgcg_solve(assemble(np.ones(g.shape), g), np.ones(g.shape)).iterations)
    assert max(its) - min(its) <= 3
    assert max(its) <= 25


def test_vcycle_contracts_error():
    g = make_grid(2, 64)
    op = assemble(np.ones(g.shape), g)
    hier = build_hierarchy(op)
    rng = np.random.default_rng(3)
    x = rng.standard_normal(g.shape)
    b = op.apply(x)
    e0 = x
    e1 = x - vcycle(hier, b)
    # energy-norm reduction of one cycle
    ratio = np.sqrt(np.vdot(e1, op.apply(e1)) / np.vdot(e0, op.apply(e0)))
    assert ratio < 0.5


def test_zero_rhs_and_3d():
    g = make_grid(3, 16)
    op = assemble(random_k(g.shape, 100.0, seed=4), g)
    zero = mgcg_solve(op, np.zeros(g.shape))
    assert zero.iterations == 0 and not zero.x.any()
    res = mgcg_solve(op, np.ones(g.shape))
    assert res.converged and res.residual <= 1e-20
    x, its, resid = res
    assert its == res.iterations


def test_dirichlet_value_enters_through_rhs():
    g = make_grid(2, 16)
    op = assemble(np.full(g.shape, 2.0), g, bc_value=1.5)
    u = mgcg_solve(op, op.boundary_rhs()).x
    assert np.allclose(u, 1.5)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_solve_is_linear_in_rhs(seed):
    g = make_grid(2, 16)
    rng = np.random.default_rng(seed)
    op = assemble(random_k(g.shape, 10.0, seed), g)
    b1, b2 = rng.standard_normal((2,) + g.shape)
    u = mgcg_solve(op, b1 + 2 * b2).x
    assert np.allclose(u, mgcg_solve(op, b1).x + 2 * mgcg_solve(op, b2).x, atol=1e-8 * abs(u).max())
