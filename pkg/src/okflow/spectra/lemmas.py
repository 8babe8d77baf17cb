"""Desk-scale spectral checks of the matched Schur approximation.

All routines work with dense matrices and exact ``M^{-1}``; they are meant
for meshes with at most a few thousand vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from okflow.assembly import assemble_coefficient_mass, assemble_operators
from okflow.errors import InvalidMatrixError
from okflow.linalg import gmres, make_operator
from okflow.precond import compute_c, schur_exact_dense, schur_tilde_dense
from okflow.spectra.dense import dense_eigenvalues, jacobi_eigenvalues


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray  # of S_tilde^{-1} S, complex
    max_abs_imag: float
    max_abs_eig: float
    lambda_minus: float
    lambda_plus: float
    lower: float
    upper: float
    violations: int
    delta: float

    @property
    def relative_imag(self):
        return self.max_abs_imag / self.max_abs_eig if self.max_abs_eig else 0.0


def sym_generalized_extremes(M_E, M):
    """Smallest and largest eigenvalue of ``M^{-1} M_E`` (``M`` SPD, ``M_E`` symmetric)."""
    M = M.toarray() if hasattr(M, "toarray") else np.asarray(M, dtype=float)
    M_E = M_E.toarray() if hasattr(M_E, "toarray") else np.asarray(M_E, dtype=float)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise InvalidMatrixError("mass matrix is not positive definite") from exc
    X = la.solve_triangular(L, M_E, lower=True)
    C = la.solve_triangular(L, X.T, lower=True)
    ev = jacobi_eigenvalues(0.5 * (C + C.T))
    return float(ev[0]), float(ev[-1])


def lemma2_interval(c, eps, lambda_min, lambda_max):
    """``[1/2 + sqrt(c) l_- / (2 eps), 1 + sqrt(c) l_+ / (2 eps))`` with clipped extremes."""
    lam_minus = min(lambda_min, 0.0)
    lam_plus = max(lambda_max, 0.0)
    scale = math.sqrt(c) / (2.0 * eps)
    return 0.5 + scale * lam_minus, 1.0 + scale * lam_plus


def matching_identity_error(M, K, c, eps, shat_scale=1.0):
    """Max entrywise gap between ``S_hat M^{-1} S_hat`` and its claimed expansion,
    relative to the largest entry."""
    Md, Kd = M.toarray(), K.toarray()
    tilde = schur_tilde_dense(Md, Kd, c, eps, shat_scale=shat_scale)
    expansion = Md + eps**2 * c * Kd @ np.linalg.solve(Md, Kd) + 2 * eps * math.sqrt(c) * Kd
    return float(np.abs(tilde - expansion).max() / np.abs(expansion).max())


def verify_lemmas(mesh, u, cfg, delta=0.0, slack=1e-8, shat_scale=1.0, ops=None):
    """Spectrum of ``S_tilde^{-1} S`` for the field ``u``, with ``K`` replaced by ``K + delta M``."""
    ops = ops if ops is not None else assemble_operators(mesh)
    c = compute_c(cfg.dt, cfg.theta, cfg.sigma)
    M = ops.M.toarray()
    K = ops.K.toarray() + delta * M
    M_E = assemble_coefficient_mass(mesh, u)
    S = schur_exact_dense(M, K, M_E, c, cfg.eps)
    S_tilde = schur_tilde_dense(M, K, c, cfg.eps, shat_scale=shat_scale)
    eigs = dense_eigenvalues(np.linalg.solve(S_tilde, S))

    lmin, lmax = sym_generalized_extremes(M_E, ops.M)
    lo, hi = lemma2_interval(c, cfg.eps, lmin, lmax)
    re = eigs.real
    violations = int(np.sum((re < lo - slack) | (re > hi + slack)))
    return SpectralReport(
        eigenvalues=eigs,
        max_abs_imag=float(np.abs(eigs.imag).max()),
        max_abs_eig=float(np.abs(eigs).max()),
        lambda_minus=min(lmin, 0.0),
        lambda_plus=max(lmax, 0.0),
        lower=lo,
        upper=hi,
        violations=violations,
        delta=delta,
    )


def null_space_eigen_error(mesh, u, cfg, shat_scale=1.0, ops=None):
    """``||S_tilde^{-1} S 1 - 1|| / ||1||``; constants span ``null(K)`` so the exact value is 0."""
    ops = ops if ops is not None else assemble_operators(mesh)
    c = compute_c(cfg.dt, cfg.theta, cfg.sigma)
    M = ops.M.toarray()
    K = ops.K.toarray()
    M_E = assemble_coefficient_mass(mesh, u)
    S = schur_exact_dense(M, K, M_E, c, cfg.eps)
    S_tilde = schur_tilde_dense(M, K, c, cfg.eps, shat_scale=shat_scale)
    one = np.ones(M.shape[0])
    return float(np.linalg.norm(np.linalg.solve(S_tilde, S @ one) - one) / np.linalg.norm(one))


def two_iteration_check(mesh, u, cfg, schur="exact", shat_scale=1.0, rel_tol=1e-10,
                        max_iter=200, ops=None):
    """GMRES iterations for the Newton matrix with a dense block preconditioner.

    ``schur`` selects the (2,2) block of the preconditioner: ``"exact"`` uses
    ``S``, ``"tilde"`` uses ``S_hat M^{-1} S_hat`` and ``"identity"`` drops
    the preconditioner altogether. ``shat_scale != 1`` injects a fault: the
    block gains the error ``S_tilde(shat_scale * S_hat) - S_tilde(S_hat)``.
    Returns ``(iterations, relative_residual)``.
    """
    ops = ops if ops is not None else assemble_operators(mesh)
    c = compute_c(cfg.dt, cfg.theta, cfg.sigma)
    a_scale = 1.0 + cfg.dt * cfg.theta * cfg.sigma
    M = ops.M.toarray()
    K = ops.K.toarray()
    M_E = assemble_coefficient_mass(mesh, u).toarray()
    A = a_scale * M
    B = cfg.dt * cfg.theta * K
    C = -(cfg.eps**2) * K - M_E
    J = np.block([[A, B], [C, M]])
    n = M.shape[0]

    if schur == "identity":
        precond = None
    else:
        if schur == "exact":
            S = schur_exact_dense(M, K, M_E, c, cfg.eps)
        elif schur == "tilde":
            S = schur_tilde_dense(M, K, c, cfg.eps)
        else:
            raise ValueError(f"unknown schur choice {schur!r}")
        if shat_scale != 1.0:
            S = S + (shat_scale**2 - 1.0) * schur_tilde_dense(M, K, c, cfg.eps)
        A_lu = la.lu_factor(A)
        S_lu = la.lu_factor(S)

        def apply(r):
            du = la.lu_solve(A_lu, r[:n])
            dw = la.lu_solve(S_lu, r[n:] - C @ du)
            return np.concatenate([du, dw])

        precond = make_operator(2 * n, apply, f"block-{schur}")

    rng = np.random.default_rng(12345)
    rhs = rng.standard_normal(2 * n)
    result = gmres(J, rhs, right_precond=precond, rel_tol=rel_tol, max_iter=max_iter)
    relres = np.linalg.norm(rhs - J @ result.x) / np.linalg.norm(rhs)
    return result.iterations, float(relres)
