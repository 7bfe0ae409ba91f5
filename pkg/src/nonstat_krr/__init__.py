"""Kernel ridge regression under non-stationary sampling distributions."""
__version__ = "0.1.0"

from ._accel import USE_NUMBA  # noqa: E402
from .densities import (  # noqa: E402
    Mixture,
    PiecewiseConstant,
    SamplerState,
    SamplingSchedule,
    TruncatedGaussian,
    convex_combine,
)
from .experiment import Scenario, canonical_scenario, run_scenario, uniform_scenario  # noqa: E402
from .kernels import Kernel  # noqa: E402
from .krr import Dataset, GammaSchedule, KrrModel, extend, fit, predict  # noqa: E402
from .operator import GridFunction, QuadratureGrid, StepFunction, canonical_step  # noqa: E402

__all__ = [
    "USE_NUMBA", "Mixture", "PiecewiseConstant", "SamplerState", "SamplingSchedule",
    "TruncatedGaussian", "convex_combine", "Scenario", "canonical_scenario", "run_scenario",
    "uniform_scenario", "Kernel", "Dataset", "GammaSchedule", "KrrModel", "extend", "fit",
    "predict", "GridFunction", "QuadratureGrid", "StepFunction", "canonical_step",
]
