"""Exponentially fitted Petrov-Galerkin finite differences for singularly
perturbed convection-diffusion on Shishkin meshes, with double-mesh
convergence studies."""

__version__ = "0.1.0"

from .convergence import ConvergenceReport, SweepConfig, run_sweep, two_mesh_diff
from .linsolve import SolverError, solve
from .mesh import TensorMesh, shishkin_mesh
from .problem import ProblemSpec, get_problem
from .scheme import FITTED, UPWIND, assemble
from .solution import GridFunction, sup_diff

__all__ = [
    "ConvergenceReport", "FITTED", "GridFunction", "ProblemSpec", "SolverError",
    "SweepConfig", "TensorMesh", "UPWIND", "assemble", "get_problem", "run_sweep",
    "shishkin_mesh", "solve", "sup_diff", "two_mesh_diff",
]
