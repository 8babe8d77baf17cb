"""Sparse kernels and iterative solvers."""

from okflow.linalg.krylov import KrylovResult, gmres
from okflow.linalg.sparse import (
    as_csr,
    as_operator,
    check_symmetric,
    identity_operator,
    make_operator,
    spmv,
)
from okflow.linalg.stationary import (
    SSOR,
    ChebyshevSolver,
    chebyshev_semi_iteration,
    estimate_jacobi_spectrum,
    estimate_preconditioned_spectrum,
    richardson,
)

__all__ = [
    "ChebyshevSolver",
    "KrylovResult",
    "SSOR",
    "as_csr",
    "as_operator",
    "chebyshev_semi_iteration",
    "check_symmetric",
    "estimate_jacobi_spectrum",
    "estimate_preconditioned_spectrum",
    "gmres",
    "identity_operator",
    "make_operator",
    "richardson",
    "spmv",
]
