"""State and adjoint diffusion solves with SIMP conductivity.

The state equation is posed as ``-div(k(w) grad u) = g`` in Q with ``u = u0`` on
the boundary, so a positive source raises ``u`` and its interior maxima carry
negative iso-contour curvature. The adjoint uses the same SPD operator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec
from .mgsolve import MultigridHierarchy, StencilOperator, assemble, build_hierarchy, mgcg_solve

__all__ = [
    "ADJOINT_SIGN",
    "Material",
    "StateBundle",
    "DiffusionSystem",
    "simp_conductivity",
    "simp_derivative",
    "solve_direct",
    "solve_adjoint",
    "flux_pairing",
]

# p solves div(k grad p) = ADJOINT_SIGN * h; fixed by the finite-difference
# gradient check in tests/test_functional.py
ADJOINT_SIGN = -1


@dataclass(frozen=True)
class Material:
    k_alpha: float = 2.0
    k_beta: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        if not 0 < self.k_beta < self.k_alpha:
            raise ValueError("need 0 < k_beta < k_alpha")
        if self.q < 1:
            raise ValueError("SIMP power q must be >= 1")


def simp_conductivity(w: np.ndarray, mat: Material) -> np.ndarray:
    return w**mat.q * (mat.k_alpha - mat.k_beta) + mat.k_beta


def simp_derivative(w: np.ndarray, mat: Material) -> np.ndarray:
    if mat.q == 1:
        return np.full_like(w, mat.k_alpha - mat.k_beta, dtype=float)
    return mat.q * w ** (mat.q - 1) * (mat.k_alpha - mat.k_beta)


@dataclass
class StateBundle:
    u: np.ndarray | None = None
    p: np.ndarray | None = None
    iterations: int = 0
    residual: float = 0.0
    converged: bool = True


class DiffusionSystem:
    """Operator and multigrid hierarchy for one design, shared by both solves."""

    def __init__(self, w: np.ndarray, mat: Material, grid: GridSpec, u0: float = 0.0,
                 tol: float = 1e-20, max_iter: int = 200):
        w = np.asarray(w, dtype=float)
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError("design must lie in [0, 1]")
        self.w = w
        self.mat = mat
        self.grid = grid
        self.u0 = float(u0)
        self.tol = tol
        self.max_iter = max_iter
        self.op: StencilOperator = assemble(simp_conductivity(w, mat), grid, self.u0)
        self.hierarchy: MultigridHierarchy = build_hierarchy(self.op)

    def solve(self, rhs: np.ndarray):
        return mgcg_solve(self.op, rhs, self.tol, self.max_iter, hierarchy=self.hierarchy)


def solve_direct(w, g, mat: Material, grid: GridSpec, u0: float = 0.0, system: DiffusionSystem | None = None,
                 **solver_kw) -> StateBundle:
    system = system or DiffusionSystem(w, mat, grid, u0, **solver_kw)
    res = system.solve(np.asarray(g, dtype=float) + system.op.boundary_rhs())
    return StateBundle(u=res.x, iterations=res.iterations, residual=res.residual, converged=res.converged)


def solve_adjoint(w, h_rhs, mat: Material, grid: GridSpec, system: DiffusionSystem | None = None,
                  sign: int = ADJOINT_SIGN, **solver_kw) -> StateBundle:
    """Solve div(k grad p) = sign * h_rhs with p = 0 on the boundary."""
    system = system or DiffusionSystem(w, mat, grid, 0.0, **solver_kw)
    # SPD form: -div(k grad p) = -sign * h
    res = system.solve(-sign * np.asarray(h_rhs, dtype=float))
    return StateBundle(p=res.x, iterations=res.iterations, residual=res.residual, converged=res.converged)


def flux_pairing(w, u, p, mat: Material, grid: GridSpec, u0: float = 0.0) -> np.ndarray:
    """Cellwise derivative of ``p . (A(w) u - b(w))`` with respect to ``w``.

    This is the face-based discrete form of ``dk/dw grad u . grad p``: every
    face contributes ``dT/dk (u_j - u_i)(p_j - p_i) / h**2`` to its two cells,
    with ``T`` the harmonic face transmissibility and the ghost-eliminated
    Dirichlet faces included.
    """
    k = simp_conductivity(w, mat)
    out = np.zeros(grid.shape)
    for a in range(grid.dim):
        km, um, pm = (np.moveaxis(x, a, 0) for x in (k, u, p))
        o = np.moveaxis(out, a, 0)
        kl, kr = km[:-1], km[1:]
        prod = (um[1:] - um[:-1]) * (pm[1:] - pm[:-1])
        o[:-1] += 2.0 * kr**2 / (kl + kr) ** 2 * prod
        o[1:] += 2.0 * kl**2 / (kl + kr) ** 2 * prod
        o[0] += 2.0 * (um[0] - u0) * pm[0]
        o[-1] += 2.0 * (um[-1] - u0) * pm[-1]
    return simp_derivative(w, mat) * out / grid.h**2
