"""Curvature functional, its support domain, adjoint source and design gradient.

The functional is ``F(w) = int_D a w**b (kappa - kappa0)**c`` with ``kappa`` the
clipped regularized mean curvature of the state. The adjoint source is
assembled term by term::

    h = h1 - h2 - h3 + h4

where ``h4`` is the interior term over D (the transposed discrete curvature
linearization applied to ``d f / d kappa``, masked to D) and ``h1..h3`` carry
the boundary integrals over ``dD`` smeared onto narrow bands with the
mollified bracket operators. When ``D = Q`` only ``h4`` remains and the
gradient is the exact derivative of the discrete functional.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .fields import CurvatureSettings, curvature_adjoint, grad_norm_eps, mean_curvature, projection_matrix_apply
from .grid import GridSpec, divergence, gradient, integrate
from .narrowband import NarrowBand, bracket_scalar, bracket_vector, box_seed, fast_march
from .pde import DiffusionSystem, flux_pairing, solve_adjoint, solve_direct

__all__ = [
    "StaticBox",
    "CurvatureThreshold",
    "WholeDomain",
    "FunctionalSpec",
    "Support",
    "AdjointTerms",
    "SensitivityBundle",
    "IntegrabilityWarning",
    "DegenerateSupportError",
    "build_support",
    "objective",
    "dkappa_f",
    "dw_f",
    "adjoint_rhs",
    "sensitivity",
    "CurvatureObjective",
]


class IntegrabilityWarning(UserWarning):
    """Curvature power above d - 1: the functional may diverge near critical points."""


class DegenerateSupportError(ValueError):
    pass


@dataclass(frozen=True)
class WholeDomain:
    pass


@dataclass(frozen=True)
class StaticBox:
    lo: tuple
    hi: tuple


@dataclass(frozen=True)
class CurvatureThreshold:
    """D = {kappa <= kappa_thr}, evaluated on the initial state when frozen."""

    kappa_thr: float
    frozen: bool = True


@dataclass(frozen=True)
class FunctionalSpec:
    a: float = -1.0
    b: int = 0
    c: int = 1
    kappa0: float = 0.0
    support: object = field(default_factory=WholeDomain)

    def __post_init__(self):
        if int(self.b) != self.b or self.b < 0:
            raise ValueError(f"b must be a non-negative integer, got {self.b}")
        if int(self.c) != self.c or self.c < 1:
            raise ValueError(f"c must be an integer >= 1, got {self.c}")

    def check_integrability(self, dim: int) -> bool:
        ok = self.c <= dim - 1
        if not ok:
            warnings.warn(
                f"curvature power c={self.c} exceeds d-1={dim - 1}; the functional is not "
                "integrable near shallow-gradient points",
                IntegrabilityWarning,
                stacklevel=2,
            )
        return ok


@dataclass(eq=False)
class Support:
    indicator: np.ndarray
    band: NarrowBand | None = None
    rule: object = None
    _outer: NarrowBand | None = field(default=None, repr=False)

    @property
    def whole(self) -> bool:
        return self.band is None

    @property
    def in_x(self):
        return None if self.band is None else self.band.in_x

    @property
    def in_y(self):
        return None if self.band is None else self.band.in_y

    @property
    def normal(self):
        return None if self.band is None else self.band.normal

    def outer_band(self) -> NarrowBand:
        """Band around dX = {|b| = sigma}, used only by the h1 term."""
        if self._outer is None:
            b = self.band
            self._outer = fast_march(np.abs(b.b) - b.sigma, b.grid, b.sigma)
        return self._outer


def build_support(u, grid: GridSpec, rule, settings: CurvatureSettings | None = None,
                  sigma: float | None = None) -> Support:
    """Indicator of D and, unless D = Q, the narrow band around its boundary."""
    if rule is None or isinstance(rule, WholeDomain):
        return Support(np.ones(grid.shape), None, rule)
    if isinstance(rule, StaticBox):
        lo = np.broadcast_to(np.asarray(rule.lo, dtype=float), (grid.dim,))
        hi = np.broadcast_to(np.asarray(rule.hi, dtype=float), (grid.dim,))
        if np.any(lo <= np.asarray(grid.lo)) or np.any(hi >= np.asarray(grid.hi)):
            raise DegenerateSupportError("static box must lie strictly inside the domain")
        phi = box_seed(grid, lo, hi)
    elif isinstance(rule, CurvatureThreshold):
        if u is None:
            raise ValueError("a curvature-threshold support needs the state")
        phi = mean_curvature(u, grid, settings) - rule.kappa_thr
    else:
        raise TypeError(f"unknown support rule {rule!r}")
    indicator = (phi <= 0).astype(float)
    if not indicator.any() or indicator.all():
        raise DegenerateSupportError(f"support rule {rule!r} selects {'no' if not indicator.any() else 'every'} cell")
    band = fast_march(phi, grid, sigma)
    return Support(indicator, band, rule)


def _power(x, k):
    return np.ones_like(x) if k == 0 else x**k


def objective(w, kappa, spec: FunctionalSpec, indicator, grid: GridSpec) -> float:
    f = spec.a * _power(w, spec.b) * _power(kappa - spec.kappa0, spec.c)
    return integrate(f, grid, indicator)


def dkappa_f(w, kappa, spec: FunctionalSpec) -> np.ndarray:
    return spec.a * spec.c * _power(w, spec.b) * _power(kappa - spec.kappa0, spec.c - 1)


def dw_f(w, kappa, spec: FunctionalSpec) -> np.ndarray:
    if spec.b == 0:
        return np.zeros_like(w, dtype=float)
    return spec.a * spec.b * _power(w, spec.b - 1) * _power(kappa - spec.kappa0, spec.c)


@dataclass
class AdjointTerms:
    h: np.ndarray
    h1: np.ndarray | None
    h2: np.ndarray
    h3: np.ndarray
    h4: np.ndarray

    def norms(self, grid: GridSpec | None = None) -> dict:
        scale = 1.0 if grid is None else np.sqrt(grid.cell_volume)
        out = {}
        for name in ("h1", "h2", "h3", "h4"):
            v = getattr(self, name)
            out[name] = 0.0 if v is None else float(np.linalg.norm(v) * scale)
        return out


def adjoint_rhs(w, u, spec: FunctionalSpec, support: Support, grid: GridSpec,
                settings: CurvatureSettings | None = None, include_h1: bool = False) -> AdjointTerms:
    settings = settings or CurvatureSettings()
    kappa = mean_curvature(u, grid, settings)
    phi = dkappa_f(w, kappa, spec)
    zero = np.zeros(grid.shape)
    h4 = support.indicator * curvature_adjoint(u, phi, grid, settings)
    if support.whole:
        return AdjointTerms(h4.copy(), None, zero, zero.copy(), h4)

    band = support.band
    in_x = band.in_x
    gu = gradient(u, grid)
    norm = grad_norm_eps(gu, settings.epsilon)
    pm = projection_matrix_apply(gu, band.normal, settings.epsilon)

    flux = bracket_vector(phi * pm / norm, band)
    # flux already vanishes off X; masking its divergence would cut the stencil
    # tail one cell outside X and break summation by parts against du
    h2 = divergence(flux, grid)
    h3 = bracket_scalar(np.sum(gradient(phi, grid) * pm, axis=0) / norm, band) * in_x

    h1 = None
    if include_h1:
        outer = support.outer_band()
        # k is the outer normal of X: +grad b on b = sigma, -grad b on b = -sigma.
        # The flux carries rho(b), which vanishes at |b| = sigma, and the Y-side
        # seeds of the outer band sit off X, so this term comes out as zero.
        q = np.sign(band.b) * np.sum(flux * band.normal, axis=0)
        h1 = bracket_scalar(q, outer) * band.in_y
    h = -h2 - h3 + h4 if h1 is None else h1 - h2 - h3 + h4
    return AdjointTerms(h, h1, h2, h3, h4)


@dataclass
class SensitivityBundle:
    F: float
    dF: np.ndarray
    h: np.ndarray | None = None
    j1: np.ndarray | None = None
    j2: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


def sensitivity(w, u, p, kappa, spec: FunctionalSpec, support: Support, mat, grid: GridSpec,
                u0: float = 0.0) -> SensitivityBundle:
    """dL/dw = j1 - j2 with j1 = df/dw on D and j2 the discrete dk/dw grad u . grad p."""
    F = objective(w, kappa, spec, support.indicator, grid)
    j1 = dw_f(w, kappa, spec) * support.indicator
    j2 = flux_pairing(w, u, p, mat, grid, u0)
    return SensitivityBundle(F, j1 - j2, None, j1, j2)


class CurvatureObjective:
    """Reduced functional ``w -> F(w)`` and its gradient for a :class:`DesignProblem`.

    ``value`` solves the state; ``gradient`` reuses that state (and the same
    multigrid hierarchy) for the adjoint solve. Linear-solver iterations and
    evaluation counts are accumulated on the instance.
    """

    def __init__(self, problem):
        self.problem = problem
        self.support: Support | None = None
        self.nfunc = 0
        self.ngrad = 0
        self.linear_iterations = 0
        self.linear_solves = 0
        self.failures = 0
        self.last_terms: AdjointTerms | None = None
        self._ctx = None
        problem.functional.check_integrability(problem.grid.dim)

    def _support_for(self, u):
        rule = self.problem.functional.support
        frozen = not isinstance(rule, CurvatureThreshold) or rule.frozen
        if self.support is None or not frozen:
            self.support = build_support(u, self.problem.grid, rule, self.problem.curvature, self.problem.sigma)
        return self.support

    def state(self, w):
        pb = self.problem
        key = np.asarray(w).tobytes()
        if self._ctx is not None and self._ctx["key"] == key:
            return self._ctx
        system = DiffusionSystem(w, pb.material, pb.grid, pb.u0, pb.mg_tol, pb.mg_max_iter)
        st = solve_direct(w, pb.source, pb.material, pb.grid, pb.u0, system=system)
        self.linear_iterations += st.iterations
        self.linear_solves += 1
        self.failures += not st.converged
        kappa = mean_curvature(st.u, pb.grid, pb.curvature)
        support = self._support_for(st.u)
        F = objective(w, kappa, pb.functional, support.indicator, pb.grid)
        self._ctx = dict(key=key, w=np.array(w, dtype=float), system=system, u=st.u, kappa=kappa,
                         support=support, F=F, direct_iterations=st.iterations)
        return self._ctx

    def value(self, w) -> float:
        ctx = self.state(w)
        self.nfunc += 1
        return ctx["F"]

    def bundle(self, w) -> SensitivityBundle:
        pb = self.problem
        ctx = self.state(w)
        terms = adjoint_rhs(ctx["w"], ctx["u"], pb.functional, ctx["support"], pb.grid, pb.curvature,
                            pb.include_h1)
        adj = solve_adjoint(ctx["w"], terms.h, pb.material, pb.grid, system=ctx["system"], sign=pb.adjoint_sign)
        self.linear_iterations += adj.iterations
        self.linear_solves += 1
        self.failures += not adj.converged
        out = sensitivity(ctx["w"], ctx["u"], adj.p, ctx["kappa"], pb.functional, ctx["support"],
                          pb.material, pb.grid, pb.u0)
        out.h = terms.h
        out.diagnostics = dict(terms.norms(pb.grid), adjoint_iterations=adj.iterations,
                               direct_iterations=ctx["direct_iterations"])
        ctx["p"] = adj.p
        self.last_terms = terms
        return out

    def gradient(self, w) -> np.ndarray:
        self.ngrad += 1
        return self.bundle(w).dF

    def fields(self, w) -> dict:
        """State, adjoint (if computed), curvature and support indicator at ``w``."""
        ctx = self.state(w)
        p = ctx.get("p")
        return dict(w=ctx["w"], u=ctx["u"], p=np.zeros_like(ctx["u"]) if p is None else p,
                    kappa=ctx["kappa"], support=ctx["support"].indicator)
