"""Nonstandard local discontinuous Galerkin methods for fully nonlinear 2D PDEs."""

from .mesh import CartesianMesh, RectDomain, build_mesh
from .numop import NumOpConfig
from .operators import LdgOperators
from .problems import PdeProblem, make_example, poisson
from .solvers import FixedPointConfig, NewtonConfig, SolverError, fixed_point_solve, newton_reduced
from .space import DgFunction, DgSpace
from .system import DiscreteSystem
from .timestep import TimeGrid, solve_parabolic

__all__ = [
    "CartesianMesh",
    "DgFunction",
    "DgSpace",
    "DiscreteSystem",
    "FixedPointConfig",
    "LdgOperators",
    "NewtonConfig",
    "NumOpConfig",
    "PdeProblem",
    "RectDomain",
    "SolverError",
    "TimeGrid",
    "build_mesh",
    "fixed_point_solve",
    "make_example",
    "newton_reduced",
    "poisson",
    "solve_parabolic",
]
__version__ = "0.1.0"
