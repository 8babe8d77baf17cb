"""P1 finite element assembly on :class:`~okflow.mesh.StructuredMesh`.

Mass and stiffness use closed-form element matrices. Terms involving the
P1 field ``u_h`` (the coefficient mass ``(3u^2 - 1)``, the cubic term and
the double-well density) are polynomials of degree at most four on each
cell and are integrated with a degree-4 exact rule, so nothing here commits
a variational crime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from okflow.errors import InvalidArgumentError
from okflow.mesh import StructuredMesh
from okflow.quadrature import simplex_rule

QUARTIC_DEGREE = 4


@dataclass(frozen=True)
class OperatorSet:
    """Constant operators of the discrete problem on one mesh."""

    mesh: StructuredMesh
    M: sp.csr_matrix
    K: sp.csr_matrix
    b: np.ndarray  # b_i = integral of phi_i


def _scatter(mesh, local):
    indptr, indices, scatter = mesh.csr_pattern
    data = np.bincount(scatter.ravel(), weights=local.ravel(), minlength=len(indices))
    n = mesh.num_vertices
    return sp.csr_matrix((data, indices, indptr), shape=(n, n))


def _cell_values(mesh, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.num_vertices,):
        raise InvalidArgumentError(
            f"expected a nodal vector of length {mesh.num_vertices}, got shape {u.shape}"
        )
    return u[mesh.cells]


def _quartic_rule(mesh):
    rule = simplex_rule(mesh.dim, QUARTIC_DEGREE)
    assert rule.degree >= QUARTIC_DEGREE, "quadrature too weak for quartic integrands"
    # weights relative to the cell volume
    return rule.points, rule.weights / rule.measure


def local_mass(dim):
    k = dim + 1
    return (np.ones((k, k)) + np.eye(k)) / ((dim + 1) * (dim + 2))


def assemble_mass(mesh):
    local = mesh.volumes[:, None, None] * local_mass(mesh.dim)[None]
    return _scatter(mesh, local)


def assemble_stiffness(mesh):
    G = mesh.barycentric_gradients
    local = mesh.volumes[:, None, None] * np.einsum("cid,cjd->cij", G, G)
    return _scatter(mesh, local)


def assemble_load(mesh):
    """Vector of basis integrals; sums to the measure of the domain."""
    vals = np.repeat(mesh.volumes[:, None] / (mesh.dim + 1), mesh.dim + 1, axis=1)
    return np.bincount(mesh.cells.ravel(), weights=vals.ravel(), minlength=mesh.num_vertices)


def assemble_coefficient_mass(mesh, u):
    """Mass matrix weighted by ``3 u_h^2 - 1``; symmetric, possibly indefinite."""
    lam, w = _quartic_rule(mesh)
    uq = _cell_values(mesh, u) @ lam.T  # (C, Q)
    coef = 3.0 * uq**2 - 1.0
    local = np.einsum("q,cq,qi,qj->cij", w, coef, lam, lam, optimize=True)
    local *= mesh.volumes[:, None, None]
    return _scatter(mesh, local)


def assemble_nonlinear(mesh, u):
    """Load vector of the cubic term, ``N(u)_i = int (u_h^3 - u_h) phi_i``."""
    lam, w = _quartic_rule(mesh)
    uq = _cell_values(mesh, u) @ lam.T
    vals = np.einsum("q,cq,qi->ci", w, uq**3 - uq, lam) * mesh.volumes[:, None]
    return np.bincount(mesh.cells.ravel(), weights=vals.ravel(), minlength=mesh.num_vertices)


def integrate_double_well(mesh, u):
    """Exact integral of ``(1 - u_h^2)^2`` over the domain."""
    lam, w = _quartic_rule(mesh)
    uq = _cell_values(mesh, u) @ lam.T
    return float(np.sum(mesh.volumes * ((1.0 - uq**2) ** 2 @ w)))


def interpolate(mesh, f):
    """Nodal interpolant of ``f(x, y[, z])`` evaluated on coordinate arrays."""
    coords = [mesh.vertices[:, k] for k in range(mesh.dim)]
    vals = np.broadcast_to(np.asarray(f(*coords), dtype=float), (mesh.num_vertices,)).copy()
    if not np.all(np.isfinite(vals)):
        raise InvalidArgumentError("interpolated function is not finite at every vertex")
    return vals


def assemble_operators(mesh):
    return OperatorSet(
        mesh=mesh,
        M=assemble_mass(mesh),
        K=assemble_stiffness(mesh),
        b=assemble_load(mesh),
    )

