"""Regularized mean curvature of state iso-contours and the tangential projector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    GridSpec,
    apply_axis,
    first_derivative_matrix,
    gradient,
    hessian,
    second_derivative_matrix,
)

__all__ = [
    "CurvatureSettings",
    "grad_norm_eps",
    "mean_curvature",
    "curvature_adjoint",
    "projection_matrix_apply",
]


@dataclass(frozen=True)
class CurvatureSettings:
    epsilon: float = 1e-20
    clamp: float | None = None  # defaults to 1/h of the active grid

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def bound(self, grid: GridSpec) -> float:
        return 1.0 / grid.h if self.clamp is None else self.clamp


def grad_norm_eps(g: np.ndarray, epsilon: float) -> np.ndarray:
    """sqrt(eps^2 + |g|^2) for a vector field with components on axis 0."""
    # scale before squaring so that eps = 1e-20 does not underflow to zero
    s = np.maximum(np.max(np.abs(g), axis=0), epsilon)
    return s * np.sqrt((epsilon / s) ** 2 + np.sum((g / s) ** 2, axis=0))


def _curvature_parts(u, grid, settings):
    g = gradient(u, grid)
    hs = hessian(u, grid)
    eps = settings.epsilon
    norm = grad_norm_eps(g, eps)
    trace = sum(hs[a, a] for a in range(grid.dim))
    hg = np.einsum("ab...,b...->a...", hs, g)
    ghg = np.sum(g * hg, axis=0)
    # div(g / |g|_eps) = tr(H)/|g|_eps - g.H.g/|g|_eps^3
    raw = trace / norm - ghg / norm**3
    return g, hs, norm, trace, hg, raw


def mean_curvature(
    u: np.ndarray, grid: GridSpec, settings: CurvatureSettings | None = None, return_mask: bool = False
):
    """kappa_eps = div(grad u / |grad u|_eps), clipped to [-1/h, 1/h].

    With ``return_mask`` also returns the boolean field of cells left unclipped.
    """
    settings = settings or CurvatureSettings()
    *_, raw = _curvature_parts(u, grid, settings)
    bound = settings.bound(grid)
    kappa = np.clip(raw, -bound, bound)
    if return_mask:
        return kappa, np.abs(raw) < bound
    return kappa


def curvature_adjoint(
    u: np.ndarray, phi: np.ndarray, grid: GridSpec, settings: CurvatureSettings | None = None
) -> np.ndarray:
    """Transpose of the linearized discrete curvature map applied to ``phi``.

    Returns ``L^T phi`` where ``L = d kappa / d u`` for the clipped discrete
    curvature, so ``sum(phi * (L du)) == sum(du * (L^T phi))`` exactly. In the
    continuum this is ``div(P(u) grad(phi) / |grad u|)``.
    """
    settings = settings or CurvatureSettings()
    g, hs, norm, trace, hg, raw = _curvature_parts(u, grid, settings)
    bound = settings.bound(grid)
    phi = np.where(np.abs(raw) < bound, phi, 0.0)
    s = norm**2
    n3 = norm**3
    d1 = first_derivative_matrix(grid.n, grid.h)
    d2 = second_derivative_matrix(grid.n, grid.h)
    out = np.zeros(grid.shape)
    for a in range(grid.dim):
        out += apply_axis(d1.T, phi * _dkappa_dg(g, trace, hg, norm, a), a)
        # d kappa / d H_aa
        dhaa = (s - g[a] ** 2) / n3
        out += apply_axis(d2.T, phi * dhaa, a)
        for b in range(a + 1, grid.dim):
            dhab = -2.0 * g[a] * g[b] / n3
            tmp = apply_axis(d1.T, phi * dhab, b)
            out += apply_axis(d1.T, tmp, a)
    return out


def _dkappa_dg(g, trace, hg, norm, a):
    # kappa = tr/|g| - gHg/|g|^3 with |g|^2 = eps^2 + g.g
    n3 = norm**3
    return -g[a] * trace / n3 - 2.0 * hg[a] / n3 + 3.0 * g[a] * np.sum(g * hg, axis=0) / norm**5


def projection_matrix_apply(g: np.ndarray, v: np.ndarray, epsilon: float = 1e-20) -> np.ndarray:
    """(1 - n n) v with n = g / |g|_eps, pointwise."""
    n = g / grad_norm_eps(g, epsilon)
    return v - np.sum(n * v, axis=0) * n
