"""Boundary method for semi-discrete optimal transport on uniform grids."""

from .driver import ConfigError, RunConfig, RunResult, run
from .ground_cost import GroundCost
from .measure import Density, DensityPiece, normalize, uniform

__all__ = ["ConfigError", "Density", "DensityPiece", "GroundCost", "RunConfig", "RunResult",
           "normalize", "run", "uniform"]
__version__ = "0.1.0"
