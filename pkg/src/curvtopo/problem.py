"""One optimization instance: grid, materials, source, functional and constraints."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import CurvatureSettings
from .functional import FunctionalSpec
from .grid import GridSpec
from .optimizer import AdmissibleSet
from .pde import ADJOINT_SIGN, Material


@dataclass
class DesignProblem:
    grid: GridSpec
    material: Material
    source: np.ndarray
    functional: FunctionalSpec
    bounds: AdmissibleSet = field(default_factory=lambda: AdmissibleSet(0.5, 0.5))
    u0: float = 0.0
    curvature: CurvatureSettings = field(default_factory=CurvatureSettings)
    sigma_factor: float = 3.0
    include_h1: bool = False
    adjoint_sign: int = ADJOINT_SIGN
    mg_tol: float = 1e-20
    mg_max_iter: int = 200

    def __post_init__(self):
        self.source = np.broadcast_to(np.asarray(self.source, dtype=float), self.grid.shape).copy()
        if self.adjoint_sign not in (-1, 1):
            raise ValueError("adjoint_sign must be +1 or -1")

    @property
    def sigma(self) -> float:
        return self.sigma_factor * self.grid.h
