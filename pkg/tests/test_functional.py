import warnings

import numpy as np
import pytest

from curvtopo.app.acceptance import fd_gradient_errors, smooth_direction
from curvtopo.app.config import PRESETS, build_problem
from curvtopo.fields import mean_curvature
from curvtopo.functional import (
    CurvatureObjective,
    CurvatureThreshold,
    DegenerateSupportError,
    FunctionalSpec,
    IntegrabilityWarning,
    StaticBox,
    WholeDomain,
    adjoint_rhs,
    build_support,
    dkappa_f,
    dw_f,
    objective,
)
from curvtopo.grid import make_grid
from curvtopo.pde import solve_direct


def problem(name="ex2d1", n=32, **kw):
    return build_problem(PRESETS[name].with_overrides(**kw), n)


def state(pb, w=0.5):
    w = np.full(pb.grid.shape, w)
    return w, solve_direct(w, pb.source, pb.material, pb.grid).u


@pytest.mark.parametrize("n", [32, 64])
def test_gradient_exact_on_whole_domain(n):
    assert max(fd_gradient_errors(problem(n=n, support="whole"))) <= 1e-4


@pytest.mark.filterwarnings("ignore::curvtopo.functional.IntegrabilityWarning")
@pytest.mark.parametrize("b,c,q", [(1, 1, 3.0), (1, 2, 1.0), (0, 3, 2.0)])
def test_gradient_exact_for_other_powers(b, c, q):
    pb = problem(support="whole", b=b, c=c, q=q, k_alpha=5.0, kappa0=-2.0)
    rng = np.random.default_rng(0)
    w = 0.3 + 0.4 * rng.random(pb.grid.shape)
    assert max(fd_gradient_errors(pb, w=w)) <= 1e-4


def test_flipped_adjoint_sign_is_detected():
    errs = fd_gradient_errors(problem(support="whole", adjoint_sign=1))
    assert min(errs) > 0.5


def test_gradient_on_static_box_is_consistent():
    assert max(fd_gradient_errors(problem(n=64))) <= 5e-2


def test_smooth_direction_is_deterministic():
    g = make_grid(2, 16)
    assert np.array_equal(smooth_direction(g, 3), smooth_direction(g, 3))
    assert not np.array_equal(smooth_direction(g, 3), smooth_direction(g, 4))


def test_pointwise_derivatives():
    spec = FunctionalSpec(a=2.0, b=2, c=3, kappa0=1.0)
    w, k = np.array([0.5]), np.array([3.0])
    assert dkappa_f(w, k, spec)[0] == pytest.approx(2 * 3 * 0.25 * 4)
    assert dw_f(w, k, spec)[0] == pytest.approx(2 * 2 * 0.5 * 8)
    assert dw_f(w, k, FunctionalSpec(b=0))[0] == 0.0


def test_spec_validation():
    with pytest.raises(ValueError):
        FunctionalSpec(b=-1)
    with pytest.raises(ValueError):
        FunctionalSpec(c=0)
    with pytest.raises(ValueError):
        FunctionalSpec(c=1.5)


def test_integrability_warning():
    with pytest.warns(IntegrabilityWarning):
        assert not FunctionalSpec(c=2).check_integrability(2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert FunctionalSpec(c=2).check_integrability(3)
        assert FunctionalSpec(c=1).check_integrability(2)


def test_box_support_area():
    g = make_grid(2, 64)
    sup = build_support(None, g, StaticBox((-0.25, -0.25), (0.25, 0.25)))
    assert sup.indicator.mean() == pytest.approx(0.25, abs=2 * g.h)
    assert not sup.whole


def test_threshold_support_is_nonempty_central_and_symmetric():
    pb = problem("ex2d4", n=32)
    w, u = state(pb)
    ind = build_support(u, pb.grid, CurvatureThreshold(-6.0), pb.curvature).indicator
    n = pb.grid.n
    assert 0 < ind.mean() < 1
    assert ind[n // 2, n // 2] == 1
    assert np.array_equal(ind, ind.T) and np.array_equal(ind, ind[::-1])


def test_threshold_frozen_versus_live():
    pb = problem("ex2d4", n=32)
    obj = CurvatureObjective(pb)
    obj.value(np.full(pb.grid.shape, 0.5))
    first = obj.support
    w = np.full(pb.grid.shape, 0.5)
    w[:16] = 0.6
    w[16:] = 0.4
    obj.value(w)
    assert obj.support is first


@pytest.mark.parametrize("rule", [StaticBox((-0.6, -0.2), (0.2, 0.2)), CurvatureThreshold(-1e9),
                                  CurvatureThreshold(1e9)])
def test_degenerate_support_raises(rule):
    pb = problem(n=32)
    w, u = state(pb)
    with pytest.raises(DegenerateSupportError):
        build_support(u, pb.grid, rule, pb.curvature)


def test_threshold_without_state_raises():
    with pytest.raises(ValueError):
        build_support(None, make_grid(2, 16), CurvatureThreshold(0.0))


def test_whole_domain_has_only_interior_term():
    pb = problem(support="whole")
    w, u = state(pb)
    sup = build_support(u, pb.grid, WholeDomain())
    terms = adjoint_rhs(w, u, pb.functional, sup, pb.grid)
    assert np.array_equal(terms.h, terms.h4)
    assert not terms.h2.any() and not terms.h3.any() and terms.h1 is None


def test_boundary_terms_have_compact_support():
    pb = problem(n=64, include_h1=True)
    w, u = state(pb)
    sup = build_support(u, pb.grid, pb.functional.support, pb.curvature, pb.sigma)
    terms = adjoint_rhs(w, u, pb.functional, sup, pb.grid, pb.curvature, include_h1=True)
    band = sup.band
    far = np.abs(band.b) > band.sigma + 2 * pb.grid.h
    assert not terms.h2[far].any()
    assert not terms.h3[band.in_x == 0].any()
    assert not terms.h1[band.in_y == 0].any()
    assert not terms.h4[sup.indicator == 0].any()
    assert np.abs(terms.h2).max() > 0


def test_h3_vanishes_for_constant_phi():
    # c = 1, b = 0: d f / d kappa = a is constant, so its tangential gradient is zero
    pb = problem(n=64)
    w, u = state(pb)
    sup = build_support(u, pb.grid, pb.functional.support, pb.curvature, pb.sigma)
    terms = adjoint_rhs(w, u, pb.functional, sup, pb.grid, pb.curvature)
    assert np.abs(terms.h3).max() <= 1e-12 * np.abs(terms.h4).max()


def test_objective_value_on_radial_field():
    g = make_grid(2, 128)
    x, y = g.centers()
    kappa = mean_curvature(1 - np.exp(-4 * (x**2 + y**2)), g)
    spec = FunctionalSpec(a=1.0, b=0, c=1)
    f = objective(np.full(g.shape, 0.5), kappa, spec, None, g)
    assert f == pytest.approx(float(np.sum(kappa) * g.cell_volume))


def test_objective_counts_and_cache():
    pb = problem(n=32)
    obj = CurvatureObjective(pb)
    w = np.full(pb.grid.shape, 0.5)
    f1 = obj.value(w)
    it = obj.linear_iterations
    assert obj.value(w) == f1 and obj.linear_iterations == it
    obj.gradient(w)
    assert obj.nfunc == 2 and obj.ngrad == 1 and obj.linear_solves == 2
    fields = obj.fields(w)
    assert set(fields) == {"w", "u", "p", "kappa", "support"}
    assert np.abs(fields["p"]).max() > 0
