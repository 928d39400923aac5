"""Uniform Cartesian grids and cell-centered field algebra.

Fields are plain numpy arrays. A scalar field on a ``dim``-dimensional grid has
shape ``(n,) * dim`` in C order with axis 0 along x, axis 1 along y (and axis 2
along z); cell ``(i, j)`` has center ``lo + (i + 1/2, j + 1/2) * h``. A vector
field stacks its components on a leading axis, shape ``(dim, n, ..., n)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

__all__ = [
    "GridSpec",
    "make_grid",
    "apply_axis",
    "first_derivative_matrix",
    "second_derivative_matrix",
    "gradient",
    "hessian",
    "divergence",
    "integrate",
]


@dataclass(frozen=True)
class GridSpec:
    dim: int
    n: int
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @property
    def h(self) -> float:
        return (self.hi[0] - self.lo[0]) / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def measure(self) -> float:
        """|Q|, area in 2-D and volume in 3-D."""
        return float(np.prod([b - a for a, b in zip(self.lo, self.hi)]))

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.lo[axis] + (np.arange(self.n) + 0.5) * self.h

    def centers(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinate arrays, one per axis, each of field shape."""
        return tuple(
            np.meshgrid(*[self.axis_centers(a) for a in range(self.dim)], indexing="ij")
        )

    def coarsen(self) -> "GridSpec":
        if self.n % 2:
            raise ValueError(f"cannot coarsen a grid with odd n={self.n}")
        return GridSpec(self.dim, self.n // 2, self.lo, self.hi)

    def with_n(self, n: int) -> "GridSpec":
        return make_grid(self.dim, n, list(zip(self.lo, self.hi)))


def make_grid(dim: int, n: int, box=None) -> GridSpec:
    """Build a grid of ``n**dim`` cells on ``box``.

    ``box`` is either one ``(lo, hi)`` pair used on every axis or a sequence of
    ``dim`` pairs; the default is ``[-0.5, 0.5]**dim``. All axes must have the
    same extent so that a single cell width ``h`` applies.
    """
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if int(n) != n or n < 4:
        raise ValueError(f"n must be an integer >= 4, got {n}")
    if box is None:
        box = (-0.5, 0.5)
    box = np.asarray(box, dtype=float)
    if box.shape == (2,):
        box = np.tile(box, (dim, 1))
    if box.shape != (dim, 2):
        raise ValueError(f"box must be (lo, hi) or {dim} such pairs")
    extent = box[:, 1] - box[:, 0]
    if np.any(extent <= 0):
        raise ValueError("box extent must be positive on every axis")
    if not np.allclose(extent, extent[0], rtol=1e-12, atol=0):
        raise ValueError("all axes must share the same extent")
    return GridSpec(dim, int(n), tuple(box[:, 0].tolist()), tuple(box[:, 1].tolist()))


@lru_cache(maxsize=64)
def first_derivative_matrix(n: int, h: float) -> sp.csr_matrix:
    """Central first difference, one-sided second-order rows at both ends."""
    m = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        m[i, i - 1] = -0.5
        m[i, i + 1] = 0.5
    m[0, 0:3] = [-1.5, 2.0, -0.5]
    m[n - 1, n - 3 :] = [0.5, -2.0, 1.5]
    return (m / h).tocsr()


@lru_cache(maxsize=64)
def second_derivative_matrix(n: int, h: float) -> sp.csr_matrix:
    """Central second difference; ends use the 4-point second-order one-sided rule."""
    m = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        m[i, i - 1 : i + 2] = [1.0, -2.0, 1.0]
    m[0, 0:4] = [2.0, -5.0, 4.0, -1.0]
    m[n - 1, n - 4 :] = [-1.0, 4.0, -5.0, 2.0]
    return (m / h**2).tocsr()


def apply_axis(mat, u: np.ndarray, axis: int) -> np.ndarray:
    """Apply a 1-D operator ``mat`` along ``axis`` of ``u``."""
    moved = np.moveaxis(u, axis, 0)
    out = mat @ moved.reshape(moved.shape[0], -1)
    return np.moveaxis(np.asarray(out).reshape(moved.shape), 0, axis)


def gradient(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    d1 = first_derivative_matrix(grid.n, grid.h)
    return np.stack([apply_axis(d1, u, a) for a in range(grid.dim)])


def hessian(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Per-cell Hessian, shape ``(dim, dim, *grid.shape)``, symmetric by construction."""
    d1 = first_derivative_matrix(grid.n, grid.h)
    d2 = second_derivative_matrix(grid.n, grid.h)
    dim = grid.dim
    out = np.empty((dim, dim) + grid.shape)
    for a in range(dim):
        out[a, a] = apply_axis(d2, u, a)
        for b in range(a + 1, dim):
            out[a, b] = apply_axis(d1, apply_axis(d1, u, a), b)
            out[b, a] = out[a, b]
    return out


def divergence(v: np.ndarray, grid: GridSpec) -> np.ndarray:
    d1 = first_derivative_matrix(grid.n, grid.h)
    return sum(apply_axis(d1, v[a], a) for a in range(grid.dim))


def integrate(f: np.ndarray, grid: GridSpec, region: np.ndarray | None = None) -> float:
    """Midpoint rule over the whole domain or over an indicator ``region``."""
    if region is not None:
        f = f * region
    return float(np.sum(f) * grid.cell_volume)
