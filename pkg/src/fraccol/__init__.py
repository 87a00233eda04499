"""Continuous collocation in time for time-fractional subdiffusion.

Submodules:

- ``specfun``: gamma function and Caputo power-rule coefficients
- ``collocation``: collocation point families and step matrices
- ``denselin``: small dense LU, eigenvalue and PSD kernels
- ``wellposed``: solvability certificates for one collocation step
- ``history``: memory weights of the Caputo derivative
- ``spatial``: finite-difference elliptic operator in 1D
- ``stepper``: linear subdiffusion and fractional ODE time stepping
- ``semilinear``: fixed-point stepping for semilinear problems
- ``cli``: command-line front end
"""

from .collocation import CollocationRule, build_matrices, make_points
from .errors import (
    CertificateError,
    ConfigError,
    ConvergenceError,
    DomainError,
    FraccolError,
    SingularMatrixError,
)
from .specfun import caputo_power_coefficient, gamma
from .stepper import PiecewiseSolution, SubdiffusionProblem, TemporalMesh, solve, solve_fode
from .wellposed import charpoly_subsets, spectrum

__version__ = "0.1.0"

__all__ = [
    "CollocationRule",
    "build_matrices",
    "make_points",
    "CertificateError",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "FraccolError",
    "SingularMatrixError",
    "caputo_power_coefficient",
    "gamma",
    "PiecewiseSolution",
    "SubdiffusionProblem",
    "TemporalMesh",
    "solve",
    "solve_fode",
    "charpoly_subsets",
    "spectrum",
]
