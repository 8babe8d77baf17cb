"""Fixed-step stationary iterations: Chebyshev, Richardson and SSOR.

Every method here runs a fixed number of steps from a zero initial guess, so
the map from right-hand side to output is linear and may be used as a
preconditioner inside standard (non-flexible) GMRES.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve_triangular

from okflow.errors import InvalidArgumentError, InvalidMatrixError
from okflow.linalg.sparse import as_operator, make_operator


def chebyshev_semi_iteration(A, diag_precond, b, k, lambda_min, lambda_max):
    """Degree-``k`` Chebyshev acceleration of Jacobi for SPD ``A``.

    ``diag_precond`` is the diagonal D (not its inverse); ``[lambda_min,
    lambda_max]`` must enclose the spectrum of ``D^{-1} A``. The iterate is
    ``x_k = p(D^{-1} A) D^{-1} b`` with ``p`` the scaled Chebyshev polynomial,
    computed with the three-term recurrence.
    """
    dinv = 1.0 / np.asarray(diag_precond, dtype=float)
    return _chebyshev(A, lambda r: dinv * r, b, k, lambda_min, lambda_max)


def _chebyshev(A, apply_precond, b, k, lambda_min, lambda_max):
    if lambda_min <= 0:
        raise InvalidArgumentError(f"lambda_min must be positive, got {lambda_min}")
    if lambda_max < lambda_min:
        raise InvalidArgumentError("lambda_max must not be below lambda_min")
    if k < 1:
        raise InvalidArgumentError("Chebyshev needs at least one iteration")
    b = np.asarray(b, dtype=float)
    theta = 0.5 * (lambda_max + lambda_min)
    delta = 0.5 * (lambda_max - lambda_min)

    x = np.zeros_like(b)
    r = b.copy()
    d = apply_precond(r) / theta
    if delta == 0.0:
        # degenerate interval: Richardson with the exact optimal step
        for i in range(k):
            x += d
            if i < k - 1:
                r -= A @ d
                d = apply_precond(r) / theta
        return x
    sigma = theta / delta
    rho = 1.0 / sigma
    for i in range(k):
        x += d
        if i == k - 1:
            break
        r -= A @ d
        rho_new = 1.0 / (2.0 * sigma - rho)
        d = rho_new * rho * d + (2.0 * rho_new / delta) * apply_precond(r)
        rho = rho_new
    return x


def richardson(apply_A, apply_P_inv, b, k):
    """``x_{j+1} = x_j + P^{-1}(b - A x_j)`` from ``x_0 = 0``; returns ``x_k``."""
    A = as_operator(apply_A)
    P = as_operator(apply_P_inv)
    b = np.asarray(b, dtype=float)
    if A.shape[1] != b.shape[0] or P.shape[1] != b.shape[0]:
        raise InvalidArgumentError("richardson: dimension mismatch")
    if k < 1:
        raise InvalidArgumentError("richardson needs k >= 1")
    x = P.matvec(b)
    for _ in range(k - 1):
        x = x + P.matvec(b - A.matvec(x))
    return x


def _lanczos_ritz(apply, n, steps, seed):
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    Q = [q]
    alphas, betas = [], []
    beta = 0.0
    q_prev = np.zeros(n)
    for _ in range(min(steps, n)):
        w = apply(q) - beta * q_prev
        alpha = q @ w
        w -= alpha * q
        for qq in Q:  # full reorthogonalisation; step counts are small
            w -= (qq @ w) * qq
        alphas.append(alpha)
        beta = np.linalg.norm(w)
        if beta <= 1e-12 * max(abs(alpha), 1.0):
            break
        betas.append(beta)
        q_prev, q = q, w / beta
        Q.append(q)
    T = np.diag(alphas)
    if len(alphas) > 1:
        off = np.array(betas[: len(alphas) - 1])
        T += np.diag(off, 1) + np.diag(off, -1)
    return np.linalg.eigvalsh(T)


def estimate_jacobi_spectrum(A, probes=30, seed=0, lower_safety=0.9, upper_safety=1.1):
    """Interval enclosing the spectrum of ``diag(A)^{-1} A`` for SPD ``A``.

    Runs ``probes`` Lanczos steps on the symmetric scaling
    ``D^{-1/2} A D^{-1/2}`` and widens the extreme Ritz values.
    """
    A = sp.csr_matrix(A)
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise InvalidMatrixError("matrix has non-positive diagonal entries; not SPD")
    s = 1.0 / np.sqrt(diag)
    ritz = _lanczos_ritz(lambda v: s * (A @ (s * v)), A.shape[0], probes, seed)
    if ritz[0] <= 0:
        raise InvalidMatrixError(f"non-positive Ritz value {ritz[0]:.3e}; matrix not SPD")
    return lower_safety * ritz[0], upper_safety * ritz[-1]


class SSOR:
    """Symmetric SOR preconditioner ``x = P^{-1} r`` for SPD ``A``."""

    def __init__(self, A, omega=1.0):
        if not 0 < omega < 2:
            raise InvalidArgumentError("SSOR needs 0 < omega < 2")
        A = sp.csr_matrix(A)
        self.omega = omega
        self.diag = A.diagonal()
        D = sp.diags(self.diag / omega)
        self.lower = sp.csr_matrix(D + sp.tril(A, -1))
        self.upper = sp.csr_matrix(D + sp.triu(A, 1))
        self.scale = (2.0 - omega) / omega

    def __call__(self, r):
        y = spsolve_triangular(self.lower, r, lower=True)
        y *= self.scale * self.diag / self.omega
        return spsolve_triangular(self.upper, y, lower=False)


def estimate_preconditioned_spectrum(A, apply_precond, steps=30, seed=0,
                                     lower_safety=0.9, upper_safety=1.1):
    """Ritz interval of ``P^{-1} A`` from the CG/Lanczos coefficients.

    Used for SPD preconditioners without a cheap symmetric square root
    (SSOR). CG coefficients define the Lanczos tridiagonal in the
    P-inner product.
    """
    A = sp.csr_matrix(A)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(n)
    x = np.zeros(n)
    r = b.copy()
    z = apply_precond(r)
    p = z.copy()
    rz = r @ z
    alphas, betas = [], []
    for _ in range(min(steps, n)):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise InvalidMatrixError("non-positive curvature; matrix not SPD")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = apply_precond(r)
        rz_new = r @ z
        alphas.append(alpha)
        beta = rz_new / rz
        if rz_new <= 1e-28 * (b @ b):
            break
        betas.append(beta)
        p = z + beta * p
        rz = rz_new
    k = len(alphas)
    T = np.zeros((k, k))
    for i in range(k):
        T[i, i] = 1.0 / alphas[i] + (betas[i - 1] / alphas[i - 1] if i else 0.0)
        if i + 1 < k:
            T[i, i + 1] = T[i + 1, i] = np.sqrt(betas[i]) / alphas[i]
    ritz = np.linalg.eigvalsh(T)
    return lower_safety * ritz[0], upper_safety * ritz[-1]


class ChebyshevSolver:
    """Fixed Chebyshev approximate inverse of an SPD matrix as a linear map.

    Spectrum bounds are estimated once at construction; the preconditioner is
    Jacobi by default or SSOR (``precond="ssor"``).
    """

    def __init__(self, A, iterations=10, precond="jacobi", probes=30, bounds=None, omega=1.0):
        self.A = sp.csr_matrix(A)
        self.iterations = iterations
        self.precond = precond
        if precond == "jacobi":
            dinv = 1.0 / self.A.diagonal()
            self._apply_precond = lambda r: dinv * r
            est = lambda: estimate_jacobi_spectrum(self.A, probes)
        elif precond == "ssor":
            ssor = SSOR(self.A, omega)
            self._apply_precond = ssor
            est = lambda: estimate_preconditioned_spectrum(self.A, ssor, probes)
        else:
            raise InvalidArgumentError(f"unknown Chebyshev preconditioner {precond!r}")
        self.bounds = tuple(bounds) if bounds is not None else est()

    def __call__(self, b):
        return _chebyshev(self.A, self._apply_precond, b, self.iterations, *self.bounds)

    def as_operator(self, label="chebyshev"):
        return make_operator(self.A.shape[0], self, label)
