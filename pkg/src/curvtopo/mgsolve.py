"""Multigrid-preconditioned conjugate gradients for -div(k grad u) = f.

The operator is stored in its symmetric positive definite form
``A u = -div(k grad u)`` per unit volume, discretized by cell-centered finite
volumes: interior faces carry the harmonic mean of the two adjacent cell
conductivities and Dirichlet faces are closed by eliminating a mirrored ghost
cell, which gives the boundary face a transmissibility of ``2 k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .grid import GridSpec

__all__ = [
    "StencilOperator",
    "MultigridHierarchy",
    "SolveResult",
    "BreakdownError",
    "assemble",
    "harmonic_faces",
    "build_hierarchy",
    "vcycle",
    "mgcg_solve",
]


class BreakdownError(RuntimeError):
    """CG met a direction with non-positive curvature (operator not SPD)."""


def harmonic_faces(k: np.ndarray, axis: int) -> np.ndarray:
    """Face transmissibilities along ``axis``; ``n + 1`` faces including both boundaries."""
    k = np.moveaxis(k, axis, 0)
    left, right = k[:-1], k[1:]
    inner = 2.0 * left * right / (left + right)
    faces = np.concatenate([2.0 * k[:1], inner, 2.0 * k[-1:]], axis=0)
    return np.moveaxis(faces, 0, axis)


@dataclass
class StencilOperator:
    grid: GridSpec
    k: np.ndarray
    faces: tuple[np.ndarray, ...]
    bc_value: float = 0.0
    diag: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h2 = self.grid.h**2
        d = np.zeros(self.grid.shape)
        for a, t in enumerate(self.faces):
            t = np.moveaxis(t, a, 0)
            d += np.moveaxis(t[:-1] + t[1:], 0, a)
        self.diag = d / h2

    def apply(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        for a, t in enumerate(self.faces):
            pad = [(0, 0)] * x.ndim
            pad[a] = (1, 1)
            flux = t * np.diff(np.pad(x, pad), axis=a)
            out -= np.diff(flux, axis=a)
        return out / self.grid.h**2

    __matmul__ = apply

    def boundary_rhs(self) -> np.ndarray:
        """Right-hand-side contribution of the Dirichlet value ``bc_value``."""
        out = np.zeros(self.grid.shape)
        if self.bc_value == 0.0:
            return out
        for a, t in enumerate(self.faces):
            t = np.moveaxis(t, a, 0)
            o = np.moveaxis(out, a, 0)
            o[0] += t[0] * self.bc_value
            o[-1] += t[-1] * self.bc_value
        return out / self.grid.h**2

    def to_sparse(self) -> sp.csr_matrix:
        """Assembled matrix, for tests and the coarse direct solve."""
        n = self.grid.n
        idx = np.arange(self.grid.size).reshape(self.grid.shape)
        rows, cols, vals = [], [], []
        h2 = self.grid.h**2
        for a, t in enumerate(self.faces):
            inner = np.take(t, np.arange(1, n), axis=a) / h2
            i0 = np.take(idx, np.arange(0, n - 1), axis=a).ravel()
            i1 = np.take(idx, np.arange(1, n), axis=a).ravel()
            v = inner.ravel()
            rows += [i0, i1]
            cols += [i1, i0]
            vals += [-v, -v]
        rows.append(idx.ravel())
        cols.append(idx.ravel())
        vals.append(self.diag.ravel())
        m = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.grid.size,) * 2,
        )
        return m.tocsr()


def assemble(k_cell: np.ndarray, grid: GridSpec, bc_value: float = 0.0) -> StencilOperator:
    k_cell = np.asarray(k_cell, dtype=float)
    if k_cell.shape != grid.shape:
        raise ValueError(f"conductivity shape {k_cell.shape} != grid shape {grid.shape}")
    if not np.all(k_cell > 0) or not np.all(np.isfinite(k_cell)):
        raise ValueError("conductivity must be positive and finite in every cell")
    faces = tuple(harmonic_faces(k_cell, a) for a in range(grid.dim))
    return StencilOperator(grid, k_cell, faces, float(bc_value))


# --- grid transfers -------------------------------------------------------


def _prolong_axis(c: np.ndarray, axis: int) -> np.ndarray:
    c = np.moveaxis(c, axis, 0)
    # zero Dirichlet data: the mirrored ghost is the negated boundary cell
    ext = np.concatenate([-c[:1], c, -c[-1:]], axis=0)
    f = np.empty((2 * c.shape[0],) + c.shape[1:])
    f[0::2] = 0.75 * ext[1:-1] + 0.25 * ext[:-2]
    f[1::2] = 0.75 * ext[1:-1] + 0.25 * ext[2:]
    return np.moveaxis(f, 0, axis)


def _restrict_axis(f: np.ndarray, axis: int) -> np.ndarray:
    # transpose of _prolong_axis, divided by 2
    f = np.moveaxis(f, axis, 0)
    even, odd = f[0::2], f[1::2]
    c = 0.75 * (even + odd)
    c[1:] += 0.25 * odd[:-1]
    c[:-1] += 0.25 * even[1:]
    c[0] -= 0.25 * even[0]
    c[-1] -= 0.25 * odd[-1]
    return np.moveaxis(0.5 * c, 0, axis)


def prolong(c: np.ndarray) -> np.ndarray:
    for a in range(c.ndim):
        c = _prolong_axis(c, a)
    return c


def restrict(f: np.ndarray) -> np.ndarray:
    for a in range(f.ndim):
        f = _restrict_axis(f, a)
    return f


def _agglomerate(k: np.ndarray) -> np.ndarray:
    for a in range(k.ndim):
        k = np.moveaxis(k, a, 0)
        k = 0.5 * (k[0::2] + k[1::2])
        k = np.moveaxis(k, 0, a)
    return k


@dataclass
class MultigridHierarchy:
    levels: list[StencilOperator]
    omega: float
    sweeps: int = 1
    _coarse_factor: tuple = field(default=None, repr=False)

    def __post_init__(self):
        coarse = self.levels[-1].to_sparse().toarray()
        self._coarse_factor = sla.cho_factor(coarse)

    def coarse_solve(self, b: np.ndarray) -> np.ndarray:
        return sla.cho_solve(self._coarse_factor, b.ravel()).reshape(b.shape)


def build_hierarchy(
    op: StencilOperator, omega: float | None = None, sweeps: int = 1, coarsest: int = 4
) -> MultigridHierarchy:
    """Coarsen by halving n down to ``coarsest`` cells per axis.

    Coarse conductivities are 2**dim-cell averages of the finer ones and faces
    are re-harmonic-averaged on every level.
    """
    if omega is None:
        omega = 2.0 / 3.0 if op.grid.dim == 2 else 0.8
    levels = [op]
    g, k = op.grid, op.k
    while g.n % 2 == 0 and g.n // 2 >= coarsest:
        g, k = g.coarsen(), _agglomerate(k)
        levels.append(assemble(k, g))
    if levels[-1].grid.size > 4096:
        raise ValueError(f"coarsest level too large ({levels[-1].grid.size} cells); use n = 4 * 2**m")
    return MultigridHierarchy(levels, omega, sweeps)


def _smooth(op: StencilOperator, x: np.ndarray, b: np.ndarray, omega: float, sweeps: int):
    for _ in range(sweeps):
        x = x + omega * (b - op.apply(x)) / op.diag
    return x


def vcycle(hier: MultigridHierarchy, rhs: np.ndarray, x0: np.ndarray | None = None, level: int = 0):
    """One V-cycle with damped-Jacobi pre/post smoothing."""
    op = hier.levels[level]
    if level == len(hier.levels) - 1:
        return hier.coarse_solve(rhs)
    x = np.zeros_like(rhs) if x0 is None else x0
    x = _smooth(op, x, rhs, hier.omega, hier.sweeps)
    r = rhs - op.apply(x)
    e = vcycle(hier, restrict(r), None, level + 1)
    x = x + prolong(e)
    return _smooth(op, x, rhs, hier.omega, hier.sweeps)


@dataclass
class SolveResult:
    x: np.ndarray
    iterations: int
    residual: float  # squared relative residual ||r||^2 / ||b||^2
    converged: bool

    def __iter__(self):
        return iter((self.x, self.iterations, self.residual))


def mgcg_solve(
    op: StencilOperator,
    rhs: np.ndarray,
    tol: float = 1e-20,
    max_iter: int = 200,
    x0: np.ndarray | None = None,
    hierarchy: MultigridHierarchy | None = None,
) -> SolveResult:
    """Preconditioned CG with one V-cycle per iteration.

    ``tol`` bounds the squared relative residual, so the default ``1e-20`` means
    a relative residual of ``1e-10``.
    """
    bnorm2 = float(np.vdot(rhs, rhs))
    if bnorm2 == 0.0:
        return SolveResult(np.zeros_like(rhs), 0, 0.0, True)
    if hierarchy is None:
        hierarchy = build_hierarchy(op)
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    r = rhs - op.apply(x) if x0 is not None else rhs.copy()
    rr = float(np.vdot(r, r))
    if rr / bnorm2 <= tol:
        return SolveResult(x, 0, rr / bnorm2, True)
    z = vcycle(hierarchy, r)
    p = z.copy()
    rz = float(np.vdot(r, z))
    for it in range(1, max_iter + 1):
        ap = op.apply(p)
        pap = float(np.vdot(p, ap))
        if pap <= 0.0:
            raise BreakdownError(f"non-positive curvature p.Ap={pap:.3e} at iteration {it}")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rr = float(np.vdot(r, r))
        if rr / bnorm2 <= tol:
            return SolveResult(x, it, rr / bnorm2, True)
        z = vcycle(hierarchy, r)
        rz_new = float(np.vdot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    return SolveResult(x, max_iter, rr / bnorm2, False)
