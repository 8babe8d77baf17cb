"""Finite element solver for the Ohta-Kawasaki equations with a matched
Schur-complement block preconditioner."""

from okflow.mesh import StructuredMesh, build_mesh
from okflow.okmodel import (
    IterationStats,
    Problem,
    SolverConfig,
    State,
    avg_gmres_per_newton,
    run_simulation,
)

__version__ = "0.1.0"

__all__ = [
    "IterationStats",
    "Problem",
    "SolverConfig",
    "State",
    "StructuredMesh",
    "avg_gmres_per_newton",
    "build_mesh",
    "run_simulation",
]
