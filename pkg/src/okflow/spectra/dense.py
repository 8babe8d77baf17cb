"""Small dense eigensolvers used by the verification harness.

* :func:`hessenberg` / :func:`dense_eigenvalues`: Householder reduction
  followed by the Francis implicit double-shift QR iteration.
* :func:`jacobi_eigenvalues`: cyclic Jacobi for symmetric matrices, with
  the round-robin ordering so that each round applies ``n/2`` disjoint
  rotations at once.
"""

from __future__ import annotations

import numpy as np

from okflow.errors import InvalidArgumentError, InvalidMatrixError, NumericalFailure

MAX_DENSE_DIM = 2000


def _check_square(A):
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] > MAX_DENSE_DIM:
        raise InvalidArgumentError(f"dense eigensolvers are limited to {MAX_DENSE_DIM} rows")
    if not np.all(np.isfinite(A)):
        raise InvalidArgumentError("matrix has non-finite entries")
    return A


def _householder(x):
    """Unit ``v`` and ``beta`` with ``(I - beta v v^T) x = -sign(x0) ||x|| e_0``."""
    v = x.copy()
    alpha = np.linalg.norm(x)
    if alpha == 0.0:
        return v, 0.0
    v[0] += np.copysign(alpha, x[0])
    return v, 2.0 / (v @ v)


def hessenberg(A):
    """Upper Hessenberg matrix orthogonally similar to ``A``."""
    H = _check_square(A)
    n = H.shape[0]
    for k in range(n - 2):
        v, beta = _householder(H[k + 1:, k])
        if beta == 0.0:
            continue
        H[k + 1:, k:] -= beta * np.outer(v, v @ H[k + 1:, k:])
        H[:, k + 1:] -= beta * np.outer(H[:, k + 1:] @ v, v)
        H[k + 2:, k] = 0.0
    return H


def _eig2(a, b, c, d):
    """Eigenvalues of [[a, b], [c, d]]."""
    half_tr = 0.5 * (a + d)
    disc = (0.5 * (a - d)) ** 2 + b * c
    if disc >= 0:
        root = np.sqrt(disc)
        # avoid cancellation in the smaller root
        big = half_tr + np.copysign(root, half_tr) if half_tr != 0 else root
        det = a * d - b * c
        small = det / big if big != 0 else half_tr - root
        return [complex(big), complex(small)]
    root = np.sqrt(-disc)
    return [complex(half_tr, root), complex(half_tr, -root)]


def _francis_step(H, shift_sum=None, shift_prod=None):
    """One implicit double-shift QR sweep on the unreduced Hessenberg block ``H``."""
    p = H.shape[0]
    if shift_sum is None:
        shift_sum = H[p - 2, p - 2] + H[p - 1, p - 1]
        shift_prod = H[p - 2, p - 2] * H[p - 1, p - 1] - H[p - 2, p - 1] * H[p - 1, p - 2]
    x = H[0, 0] * H[0, 0] + H[0, 1] * H[1, 0] - shift_sum * H[0, 0] + shift_prod
    y = H[1, 0] * (H[0, 0] + H[1, 1] - shift_sum)
    z = H[1, 0] * H[2, 1]
    for k in range(p - 2):
        v, beta = _householder(np.array([x, y, z]))
        if beta != 0.0:
            q = max(0, k - 1)
            H[k:k + 3, q:] -= beta * np.outer(v, v @ H[k:k + 3, q:])
            r = min(k + 4, p)
            H[:r, k:k + 3] -= beta * np.outer(H[:r, k:k + 3] @ v, v)
            if k > 0:
                H[k + 1:k + 3, k - 1] = 0.0
        x = H[k + 1, k]
        y = H[k + 2, k]
        if k < p - 3:
            z = H[k + 3, k]
    v, beta = _householder(np.array([x, y]))
    if beta != 0.0:
        H[p - 2:, p - 3:] -= beta * np.outer(v, v @ H[p - 2:, p - 3:])
        H[:, p - 2:] -= beta * np.outer(H[:, p - 2:] @ v, v)
        H[p - 1, p - 3] = 0.0


def dense_eigenvalues(A, max_sweeps_per_eigenvalue=60):
    """All eigenvalues of a real square matrix as complex numbers.

    Raises :class:`NumericalFailure` if some eigenvalue needs more than
    ``max_sweeps_per_eigenvalue`` QR sweeps.
    """
    H = hessenberg(A)
    n = H.shape[0]
    eps = np.finfo(float).eps
    norm = max(np.abs(H).max(), np.finfo(float).tiny)
    eigs = []
    hi = n - 1
    its = 0
    while hi >= 0:
        if hi == 0:
            eigs.append(complex(H[0, 0]))
            break
        # locate the top of the unreduced block ending at hi
        lo = hi
        while lo > 0:
            s = abs(H[lo - 1, lo - 1]) + abs(H[lo, lo])
            if s == 0.0:
                s = norm
            if abs(H[lo, lo - 1]) <= eps * s:
                H[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eigs.append(complex(H[hi, hi]))
            hi -= 1
            its = 0
        elif lo == hi - 1:
            eigs.extend(_eig2(H[lo, lo], H[lo, hi], H[hi, lo], H[hi, hi]))
            hi -= 2
            its = 0
        else:
            its += 1
            if its > max_sweeps_per_eigenvalue:
                raise NumericalFailure(f"QR iteration failed to converge near index {hi}")
            block = H[lo:hi + 1, lo:hi + 1]
            if its % 11 == 0:
                # exceptional shift against cycling
                s = abs(H[hi, hi - 1]) + abs(H[hi - 1, hi - 2])
                _francis_step(block, 1.5 * s + H[hi, hi], s * s)
            else:
                _francis_step(block)
    return np.array(eigs[::-1])


def _round_robin(n):
    """Rounds of disjoint index pairs covering all pairs once (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        pairs = [(players[i], players[n - 1 - i]) for i in range(n // 2)]
        rounds.append(np.array([(min(p), max(p)) for p in pairs]).T)
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eigenvalues(A, tol=1e-14, max_sweeps=50):
    """Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi rotations."""
    A = _check_square(A)
    if np.abs(A - A.T).max() > 1e-12 * max(np.abs(A).max(), 1e-300):
        raise InvalidMatrixError("jacobi_eigenvalues needs a symmetric matrix")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    if n == 1:
        return A.diagonal().copy()
    m = n + (n % 2)
    if m != n:
        padded = np.zeros((m, m))
        padded[:n, :n] = A
        A = padded
    rounds = _round_robin(m)
    total = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * total:
            break
        for p, q in rounds:
            apq = A[p, q]
            app = A[p, p]
            aqq = A[q, q]
            active = apq != 0.0
            tau = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap, Aq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
    else:
        raise NumericalFailure("cyclic Jacobi did not converge")
    # a padding index never couples to the others, so it is simply dropped
    return np.sort(np.diag(A)[:n])
