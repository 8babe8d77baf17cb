"""Right-preconditioned GMRES."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from okflow.errors import InvalidArgumentError
from okflow.linalg.sparse import as_operator

log = logging.getLogger(__name__)


@dataclass
class KrylovResult:
    x: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)
    converged: bool = False
    stagnated: bool = False


def _givens(a, b):
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def gmres(op, b, right_precond=None, rel_tol=1e-6, max_iter=200, restart=None):
    """Solve ``op x = b`` with GMRES, right-preconditioned by ``right_precond``.

    The Krylov space is built for ``op P^{-1}`` and the iterate is recovered as
    ``x = P^{-1} y``, so the minimised residual is the residual of the original
    system. ``residuals[j]`` is the residual norm after ``j`` iterations.

    Parameters
    ----------
    op, right_precond : matrix or LinearOperator
        ``right_precond`` applies an approximate inverse; ``None`` means identity.
    rel_tol : float
        Stop once ``||b - op x|| <= rel_tol * ||b||``.
    max_iter : int
        Total iteration cap across restarts.
    restart : int or None
        Restart length; ``None`` runs full GMRES.
    """
    A = as_operator(op)
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if A.shape != (n, n):
        raise InvalidArgumentError(f"operator shape {A.shape} does not match rhs length {n}")
    if right_precond is None:
        P = None
    else:
        P = as_operator(right_precond)
        if P.shape != (n, n):
            raise InvalidArgumentError(f"preconditioner shape {P.shape} does not match {n}")
    if not np.all(np.isfinite(b)):
        raise InvalidArgumentError("right-hand side has non-finite entries")

    x = np.zeros(n)
    bnorm = np.linalg.norm(b)
    residuals = [bnorm]
    if bnorm == 0.0:
        return KrylovResult(x, 0, residuals, converged=True)
    target = rel_tol * bnorm
    m = max_iter if restart is None else min(restart, max_iter)
    total = 0
    r = b.copy()
    beta = bnorm

    while True:
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        j = 0
        stagnated = False
        done = False
        while j < m and total < max_iter:
            z = V[j] if P is None else P.matvec(V[j])
            w = A.matvec(z).ravel()
            # modified Gram-Schmidt, one reorthogonalisation pass
            for _ in range(2):
                for i in range(j + 1):
                    hij = V[i] @ w
                    H[i, j] += hij
                    w -= hij * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            for i in range(j):
                hi, hi1 = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * hi + sn[i] * hi1
                H[i + 1, j] = -sn[i] * hi + cs[i] * hi1
            hnext = H[j + 1, j]
            cs[j], sn[j] = _givens(H[j, j], hnext)
            H[j, j] = cs[j] * H[j, j] + sn[j] * hnext
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            j += 1
            total += 1
            res = abs(g[j])
            residuals.append(res)
            if res <= target:
                done = True
                break
            if hnext <= 1e-14 * np.linalg.norm(H[: j + 1, j - 1]):
                # invariant subspace reached but residual still above target
                stagnated = True
                break
            V[j] = w / hnext

        y = np.linalg.solve(np.triu(H[:j, :j]), g[:j]) if j else np.zeros(0)
        dy = V[:j].T @ y
        x += dy if P is None else P.matvec(dy)
        if done or stagnated or total >= max_iter:
            break
        r = b - A.matvec(x)
        beta = np.linalg.norm(r)
        if beta <= target:
            done = True
            break

    if stagnated:
        log.debug("GMRES stagnated after %d iterations (residual %.3e)", total, residuals[-1])
    return KrylovResult(x, total, residuals, converged=done, stagnated=stagnated)
