"""Monte Carlo laboratory for Poisson polytopes in the unit ball and Poisson hyperplane zero cells."""

from .exceptions import *  # noqa: F401,F403
from .hull import Polytope, convex_hull, polar_dual, support_function
from .sampling import (
    BallProcessConfig,
    HyperplaneProcessConfig,
    RngStream,
    StopRule,
    sample_hyperplane_generators,
    sample_tilted_ball,
    sample_uniform_ball,
)
from .functionals import FunctionalKind, PolytopeFunctionals, TestFunction, empirical_measure
from .rescale import ParabolicScaler, scale_T, scale_T_inv
from .cumulants import KStatistics, PowerLawRegressor, k_statistics, fit_scaling_exponent
from .zerocell import PVCellConfig, pv_cell, zero_cell
from .experiments import ExperimentConfig, run, summarize

__version__ = "0.1.0"
