"""Structured simplicial meshes of the unit square and cube.

Each grid square is split into two triangles along the (0,0)-(1,1) diagonal
and each grid cube into the six Kuhn tetrahedra sharing its main diagonal.
Both splits are nested under uniform refinement, so P1 spaces on the
hierarchy are nested and prolongation is exact linear interpolation.

Vertices are numbered lexicographically with x varying fastest::

    index(i, j, k) = i + (n + 1) * j + (n + 1)**2 * k
"""

from __future__ import annotations

import itertools
import math
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from okflow.errors import CannotCoarsenError, InvalidArgumentError


def _kuhn_reference(dim):
    """Vertex offsets (as 0/1 grid steps) of the Kuhn simplices of one cube."""
    simplices = []
    for perm in itertools.permutations(range(dim)):
        corner = [0] * dim
        verts = [tuple(corner)]
        for axis in perm:
            corner[axis] = 1
            verts.append(tuple(corner))
        simplices.append(verts)
    return np.array(simplices, dtype=np.int64)  # (d!, d+1, d)


class StructuredMesh:
    """Conforming simplicial mesh of (0, 1)^dim with ``n`` cells per axis.

    Instances are immutable: coordinate and connectivity arrays are marked
    read-only and derived quantities are cached on first access.
    """

    def __init__(self, dim, n):
        if dim not in (2, 3):
            raise InvalidArgumentError(f"dim must be 2 or 3, got {dim!r}")
        if int(n) != n or n < 1:
            raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")
        self.dim = int(dim)
        self.n = int(n)

        ticks = np.arange(self.n + 1)
        # x fastest: meshgrid with 'ij' on reversed axes, then reverse columns
        grids = np.meshgrid(*([ticks] * self.dim), indexing="ij")
        grid_index = np.stack([g.ravel() for g in reversed(grids)], axis=1)
        self.grid_index = grid_index
        self.vertices = grid_index * self.h

        self.cells = self._build_cells()
        for arr in (self.grid_index, self.vertices, self.cells):
            arr.setflags(write=False)

    @property
    def h(self):
        return 1.0 / self.n

    @property
    def num_vertices(self):
        return (self.n + 1) ** self.dim

    @property
    def num_cells(self):
        return math.factorial(self.dim) * self.n**self.dim

    def vertex_id(self, grid_index):
        """Map integer grid indices of shape (..., dim) to vertex numbers."""
        grid_index = np.asarray(grid_index)
        strides = (self.n + 1) ** np.arange(self.dim)
        return grid_index @ strides

    def _build_cells(self):
        d, n = self.dim, self.n
        ref = _kuhn_reference(d)
        ticks = np.arange(n)
        grids = np.meshgrid(*([ticks] * d), indexing="ij")
        base = np.stack([g.ravel() for g in reversed(grids)], axis=1)  # (n^d, d)

        # orientation per reference simplex: flip last two vertices if negative
        edges = ref[:, 1:, :] - ref[:, :1, :]
        signs = np.sign(np.linalg.det(edges.astype(float)))
        ref = ref.copy()
        flip = signs < 0
        ref[flip, -2:, :] = ref[flip, -1:-3:-1, :]

        corners = base[:, None, None, :] + ref[None, :, :, :]
        cells = self.vertex_id(corners).reshape(-1, d + 1)
        return cells.astype(np.int64)

    @cached_property
    def _jacobians(self):
        x = self.vertices[self.cells]  # (C, d+1, d)
        return x[:, 1:, :] - x[:, :1, :]  # rows are edge vectors

    @cached_property
    def signed_volumes(self):
        return np.linalg.det(self._jacobians) / math.factorial(self.dim)

    @cached_property
    def volumes(self):
        return np.abs(self.signed_volumes)

    @cached_property
    def barycentric_gradients(self):
        """Gradients of the d+1 barycentric functions on each cell, (C, d+1, d)."""
        jac_inv = np.linalg.inv(self._jacobians)  # columns: gradients of lambda_1..d
        grads_rest = np.transpose(jac_inv, (0, 2, 1))
        grad0 = -grads_rest.sum(axis=1, keepdims=True)
        return np.concatenate([grad0, grads_rest], axis=1)

    @cached_property
    def csr_pattern(self):
        """CSR sparsity of P1 operators plus a scatter map for local matrices.

        Returns ``(indptr, indices, scatter)`` where ``scatter[c, i, j]`` is the
        position in the CSR data array receiving local entry (i, j) of cell c.
        """
        nv = self.num_vertices
        k = self.dim + 1
        rows = np.repeat(self.cells, k, axis=1).ravel()
        cols = np.tile(self.cells, (1, k)).ravel()
        keys = rows * nv + cols
        uniq, inverse = np.unique(keys, return_inverse=True)
        urows = uniq // nv
        indices = (uniq % nv).astype(np.int32)
        indptr = np.zeros(nv + 1, dtype=np.int32)
        np.cumsum(np.bincount(urows, minlength=nv), out=indptr[1:])
        scatter = inverse.reshape(-1, k, k)
        for arr in (indptr, indices, scatter):
            arr.setflags(write=False)
        return indptr, indices, scatter

    def boundary_vertices(self):
        g = self.grid_index
        return np.flatnonzero(np.any((g == 0) | (g == self.n), axis=1))

    def __repr__(self):
        return f"StructuredMesh(dim={self.dim}, n={self.n})"


def build_mesh(dim, n):
    return StructuredMesh(dim, n)


def coarsen(mesh):
    """Mesh with half as many cells per axis; raises if ``mesh.n`` is odd."""
    if mesh.n % 2:
        raise CannotCoarsenError(f"cannot coarsen mesh with odd n={mesh.n}")
    return StructuredMesh(mesh.dim, mesh.n // 2)


def prolongation(coarse, fine):
    """Linear interpolation from P1 on ``coarse`` to P1 on ``fine`` as CSR.

    A fine vertex whose grid index is odd in the axis set S is the midpoint of
    the coarse vertices at ``(f - e_S)/2`` and ``(f + e_S)/2``; with the Kuhn
    split these two are always joined by a coarse edge.
    """
    if coarse.dim != fine.dim or fine.n != 2 * coarse.n:
        raise InvalidArgumentError(
            f"prolongation needs fine.n == 2*coarse.n in equal dims, got {coarse!r} -> {fine!r}"
        )
    f = fine.grid_index
    odd = f % 2
    lo = coarse.vertex_id((f - odd) // 2)
    hi = coarse.vertex_id((f + odd) // 2)
    on_coarse = ~odd.any(axis=1)

    nf = fine.num_vertices
    fine_ids = np.arange(nf)
    rows = np.concatenate([fine_ids[on_coarse], fine_ids[~on_coarse], fine_ids[~on_coarse]])
    cols = np.concatenate([lo[on_coarse], lo[~on_coarse], hi[~on_coarse]])
    vals = np.concatenate([np.ones(on_coarse.sum()), np.full(2 * (~on_coarse).sum(), 0.5)])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(nf, coarse.num_vertices))
    P.sort_indices()
    return P
