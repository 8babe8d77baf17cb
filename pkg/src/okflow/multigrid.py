"""Geometric multigrid for ``S_hat = M + eps*sqrt(c)*K`` on nested meshes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from okflow.errors import CannotCoarsenError, ConfigurationError
from okflow.instrument import COUNTERS
from okflow.mesh import coarsen, prolongation

# coarsest levels larger than this are refused even when n turns odd
MAX_DENSE_COARSE = 4096


@dataclass
class Level:
    A: sp.csr_matrix
    inv_diag: np.ndarray
    P: sp.csr_matrix | None = None  # prolongation from the next coarser level


@dataclass
class MGHierarchy:
    levels: list
    coarse_factor: tuple
    omega: float = 2.0 / 3.0
    meshes: list = field(default_factory=list)

    @property
    def size(self):
        return self.levels[0].A.shape[0]

    def __len__(self):
        return len(self.levels)


def assemble_shat(M, K, eps_sqrt_c):
    COUNTERS["shat_assembly"] += 1
    A = sp.csr_matrix(M + eps_sqrt_c * K)
    A.sort_indices()
    return A


def build_hierarchy(mesh, M, K, eps_sqrt_c, min_coarse_size=500, omega=2.0 / 3.0):
    """Galerkin hierarchy for ``M + eps_sqrt_c * K`` down to ``min_coarse_size`` unknowns.

    Coarsening stops once a level has at most ``min_coarse_size`` vertices or
    its ``n`` is odd. A level stopped early by odd ``n`` is still solved
    directly if it has no more than ``MAX_DENSE_COARSE`` unknowns.
    """
    A = assemble_shat(M, K, eps_sqrt_c)
    COUNTERS["mg_hierarchy"] += 1
    levels = []
    meshes = [mesh]
    while A.shape[0] > min_coarse_size:
        try:
            coarse = coarsen(meshes[-1])
        except CannotCoarsenError:
            if A.shape[0] > MAX_DENSE_COARSE:
                raise ConfigurationError(
                    f"mesh n={meshes[-1].n} cannot be coarsened and has {A.shape[0]} "
                    f"unknowns (> {MAX_DENSE_COARSE}) for the direct coarse solve"
                ) from None
            break
        P = prolongation(coarse, meshes[-1])
        levels.append(Level(A=A, inv_diag=1.0 / A.diagonal()))
        A = sp.csr_matrix(P.T @ A @ P)
        A.sort_indices()
        levels[-1].P = P
        meshes.append(coarse)
    levels.append(Level(A=A, inv_diag=1.0 / A.diagonal()))
    factor = la.cho_factor(A.toarray())
    return MGHierarchy(levels=levels, coarse_factor=factor, omega=omega, meshes=meshes)


def _cycle(h, lvl, b, pre, post):
    level = h.levels[lvl]
    if lvl == len(h.levels) - 1:
        return la.cho_solve(h.coarse_factor, b)
    A, dinv, w = level.A, level.inv_diag, h.omega
    x = w * dinv * b
    for _ in range(pre - 1):
        x += w * dinv * (b - A @ x)
    if pre == 0:
        x = np.zeros_like(b)
    r = b - A @ x
    x += level.P @ _cycle(h, lvl + 1, level.P.T @ r, pre, post)
    for _ in range(post):
        x += w * dinv * (b - A @ x)
    return x


def v_cycle(h, b, pre_smooths=2, post_smooths=2):
    """One V(pre, post) cycle from a zero initial guess with damped Jacobi."""
    return _cycle(h, 0, np.asarray(b, dtype=float), pre_smooths, post_smooths)


def apply_shat_inv(h, b, cycles=5, pre_smooths=2, post_smooths=2):
    """``cycles`` V-cycles composed as Richardson iteration on the fine operator."""
    b = np.asarray(b, dtype=float)
    A = h.levels[0].A
    x = v_cycle(h, b, pre_smooths, post_smooths)
    for _ in range(cycles - 1):
        x += v_cycle(h, b - A @ x, pre_smooths, post_smooths)
    return x
