"""Topology optimization of a diffusion problem with a state-curvature functional."""

from .grid import GridSpec, make_grid
from .fields import CurvatureSettings, mean_curvature
from .pde import Material
from .functional import (
    CurvatureObjective,
    CurvatureThreshold,
    FunctionalSpec,
    StaticBox,
    WholeDomain,
)
from .optimizer import AdmissibleSet, project, run
from .problem import DesignProblem

__version__ = "0.1.0"
