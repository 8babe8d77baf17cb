"""Block lower-triangular preconditioner with a matched Schur approximation.

For the Newton matrix ``J = [[A, B], [C, D]]`` with ``A = (1 + dt*theta*sigma) M``,
``B = dt*theta*K``, ``C = -eps^2 K - M_E`` and ``D = M``, the Schur complement

    S = M + eps^2 c K M^{-1} K + c M_E M^{-1} K,   c = dt*theta / (1 + dt*theta*sigma)

is approximated by ``S_tilde = S_hat M^{-1} S_hat`` with ``S_hat = M + eps*sqrt(c) K``.
``S_tilde`` reproduces the first two terms of ``S`` exactly and does not
depend on the current iterate, so ``S_hat`` and its multigrid hierarchy are
built once per configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from okflow.errors import InvalidArgumentError
from okflow.linalg import ChebyshevSolver, make_operator, richardson
from okflow.multigrid import apply_shat_inv, build_hierarchy


def compute_c(dt, theta, sigma):
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if not 0 < theta <= 1:
        raise InvalidArgumentError(f"theta must lie in (0, 1], got {theta}")
    if sigma < 0:
        raise InvalidArgumentError(f"sigma must be non-negative, got {sigma}")
    return dt * theta / (1.0 + dt * theta * sigma)


@dataclass
class SchurContext:
    c: float
    eps: float
    a_scale: float  # 1 + dt*theta*sigma
    M: sp.csr_matrix
    K: sp.csr_matrix
    hierarchy: object
    mass_solver: ChebyshevSolver
    a_solver: ChebyshevSolver
    richardson_steps: int = 2
    mg_cycles: int = 5
    pre_smooths: int = 2
    post_smooths: int = 2
    M_E: sp.csr_matrix | None = None

    @property
    def n(self):
        return self.M.shape[0]

    @property
    def eps_sqrt_c(self):
        return self.eps * math.sqrt(self.c)


def build_schur_context(ops, eps, dt, theta, sigma, cheby_iters=10, richardson_steps=2,
                        mg_cycles=5, pre_smooths=2, post_smooths=2, mg_omega=2.0 / 3.0,
                        min_coarse_size=500, cheby_precond="jacobi"):
    """Set up every iterate-independent piece of the preconditioner."""
    if richardson_steps < 1:
        raise InvalidArgumentError("richardson_steps must be >= 1")
    c = compute_c(dt, theta, sigma)
    a_scale = 1.0 + dt * theta * sigma
    hierarchy = build_hierarchy(ops.mesh, ops.M, ops.K, eps * math.sqrt(c),
                                min_coarse_size=min_coarse_size, omega=mg_omega)
    mass_solver = ChebyshevSolver(ops.M, cheby_iters, precond=cheby_precond)
    # D^{-1}A is invariant under scaling A, so the M bounds carry over
    a_solver = ChebyshevSolver(a_scale * ops.M, cheby_iters, precond=cheby_precond,
                               bounds=mass_solver.bounds)
    return SchurContext(c=c, eps=eps, a_scale=a_scale, M=ops.M, K=ops.K, hierarchy=hierarchy,
                        mass_solver=mass_solver, a_solver=a_solver,
                        richardson_steps=richardson_steps, mg_cycles=mg_cycles,
                        pre_smooths=pre_smooths, post_smooths=post_smooths)


def apply_A_inv(ctx, r1):
    return ctx.a_solver(np.asarray(r1, dtype=float))


def _shat_inv(ctx, r):
    return apply_shat_inv(ctx.hierarchy, r, ctx.mg_cycles, ctx.pre_smooths, ctx.post_smooths)


def apply_schur_tilde_inv(ctx, r):
    """``S_hat^{-1} M S_hat^{-1} r`` with each ``S_hat^{-1}`` done by V-cycles."""
    return _shat_inv(ctx, ctx.M @ _shat_inv(ctx, np.asarray(r, dtype=float)))


def apply_S(ctx, v, M_E=None):
    """Schur complement action with ``M^{-1}`` replaced by the Chebyshev M-solve."""
    M_E = ctx.M_E if M_E is None else M_E
    if M_E is None:
        raise InvalidArgumentError("no coefficient mass matrix set on the context")
    t = ctx.mass_solver(ctx.K @ v)
    return ctx.M @ v + ctx.c * (ctx.eps**2 * (ctx.K @ t) + M_E @ t)


def apply_S_inv_approx(ctx, r):
    """Richardson on ``S`` preconditioned by ``S_tilde^{-1}``, ``richardson_steps`` steps."""
    r = np.asarray(r, dtype=float)
    if ctx.richardson_steps == 1:
        return apply_schur_tilde_inv(ctx, r)
    n = ctx.n
    return richardson(
        make_operator(n, lambda v: apply_S(ctx, v)),
        make_operator(n, lambda v: apply_schur_tilde_inv(ctx, v)),
        r,
        ctx.richardson_steps,
    )


def apply_C(ctx, du):
    return -(ctx.eps**2) * (ctx.K @ du) - ctx.M_E @ du


def apply_block(ctx, r):
    """Apply the block preconditioner to the stacked residual ``[r1, r2]``."""
    r = np.asarray(r, dtype=float)
    n = ctx.n
    r1, r2 = r[:n], r[n:]
    du = apply_A_inv(ctx, r1)
    dw = apply_S_inv_approx(ctx, r2 - apply_C(ctx, du))
    return np.concatenate([du, dw])


class BlockPreconditioner:
    """Preconditioner bound to a :class:`SchurContext`; ``update`` swaps in a new ``M_E``."""

    def __init__(self, ctx):
        self.ctx = ctx
        self.applications = 0

    def update(self, M_E):
        self.ctx.M_E = M_E

    def __call__(self, r):
        self.applications += 1
        return apply_block(self.ctx, r)

    def as_operator(self):
        return make_operator(2 * self.ctx.n, self, "block-preconditioner")


def newton_matrix(ctx, M_E):
    """Sparse Jacobian ``[[A, B], [C, D]]`` for the given coefficient mass."""
    dt_theta = ctx.c * ctx.a_scale
    return sp.bmat([
        [ctx.a_scale * ctx.M, dt_theta * ctx.K],
        [-(ctx.eps**2) * ctx.K - M_E, ctx.M],
    ], format="csr")


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def schur_exact_dense(M, K, M_E, c, eps, max_dim=2000):
    """Dense ``S = M + eps^2 c K M^{-1} K + c M_E M^{-1} K`` with exact ``M^{-1}``."""
    M, K, M_E = _dense(M), _dense(K), _dense(M_E)
    if M.shape[0] > max_dim:
        raise InvalidArgumentError(f"dense Schur complement limited to {max_dim} unknowns")
    MinvK = np.linalg.solve(M, K)
    return M + eps**2 * c * K @ MinvK + c * M_E @ MinvK


def schur_tilde_dense(M, K, c, eps, shat_scale=1.0, max_dim=2000):
    """Dense ``S_hat M^{-1} S_hat``; ``shat_scale`` multiplies ``S_hat`` (fault injection)."""
    M, K = _dense(M), _dense(K)
    if M.shape[0] > max_dim:
        raise InvalidArgumentError(f"dense Schur approximation limited to {max_dim} unknowns")
    shat = shat_scale * (M + eps * math.sqrt(c) * K)
    return shat @ np.linalg.solve(M, shat)
