"""CSR helpers on top of :mod:`scipy.sparse`."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from okflow.errors import InvalidArgumentError, InvalidMatrixError


def as_csr(A):
    """Canonical CSR copy: sorted column indices, duplicates summed."""
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x):
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise InvalidArgumentError(f"dimension mismatch: {A.shape} @ {x.shape}")
    return A @ x


def check_symmetric(A, rtol=1e-13):
    """Raise unless ``max|A - A^T| <= rtol * max|A|``."""
    A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise InvalidMatrixError(f"non-square matrix {A.shape}")
    scale = abs(A).max() if A.nnz else 0.0
    diff = abs(A - A.T).max() if A.nnz else 0.0
    if diff > rtol * scale:
        raise InvalidMatrixError(f"matrix not symmetric: |A - A^T| = {diff:.3e}, scale {scale:.3e}")
    return A


def as_operator(op, label=None):
    """Wrap matrices, callables and operators into a ``LinearOperator``."""
    if isinstance(op, LinearOperator):
        return op
    if callable(op) and not hasattr(op, "shape"):
        raise InvalidArgumentError("bare callables need an explicit dimension; use make_operator")
    return aslinearoperator(op)


def make_operator(n, apply, label=None):
    op = LinearOperator((n, n), matvec=apply, dtype=float)
    op.label = label
    return op


def identity_operator(n):
    return make_operator(n, lambda x: np.array(x, dtype=float, copy=True).ravel(), "identity")
