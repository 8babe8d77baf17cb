"""Theta-method time stepping of the Ohta-Kawasaki equations with Newton-Krylov.

Semi-discrete system (P1 in space, ``b_i = int phi_i``)::

    M u_t + K w + sigma (M u - m b) = 0
    M w - eps^2 K u - N(u)          = 0,   N(u)_i = int (u^3 - u) phi_i

The first equation is advanced with the theta-method; the second is imposed
at the new time level only.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import cg

from okflow.assembly import (
    assemble_coefficient_mass,
    assemble_nonlinear,
    assemble_operators,
    integrate_double_well,
    interpolate,
)
from okflow.errors import (
    ConfigurationError,
    InconsistentStateError,
    NumericalFailure,
    StepFailure,
)
from okflow.linalg import gmres
from okflow.mesh import build_mesh
from okflow.precond import BlockPreconditioner, build_schur_context, newton_matrix

log = logging.getLogger(__name__)


@dataclass
class SolverConfig:
    eps: float = 0.02
    sigma: float = 100.0
    m: float = 0.4
    theta: float = 0.5
    dt: float = 0.0004
    n_steps: int = 300
    dim: int = 2
    n: int = 64
    newton_tol: float = 1e-8
    newton_maxit: int = 20
    gmres_tol: float = 1e-6
    gmres_maxit: int = 200
    gmres_restart: int | None = None
    cheby_iters: int = 10
    cheby_precond: str = "jacobi"
    richardson_steps: int = 2
    mg_cycles: int = 5
    mg_pre_smooths: int = 2
    mg_post_smooths: int = 2
    mg_omega: float = 2.0 / 3.0
    min_coarse_size: int = 500
    compute_energy: bool = True

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not 0 < self.theta <= 1:
            raise ConfigurationError(f"theta must lie in (0, 1], got {self.theta}")
        if not abs(self.m) < 1:
            raise ConfigurationError(f"|m| must be below 1, got {self.m}")
        if self.sigma < 0:
            raise ConfigurationError(f"sigma must be non-negative, got {self.sigma}")
        if self.n_steps < 0:
            raise ConfigurationError("n_steps must be non-negative")
        if self.dim not in (2, 3) or self.n < 1:
            raise ConfigurationError(f"bad mesh specification dim={self.dim}, n={self.n}")
        if self.cheby_precond not in ("jacobi", "ssor"):
            raise ConfigurationError(f"cheby_precond must be 'jacobi' or 'ssor', got {self.cheby_precond!r}")
        for name in ("cheby_iters", "richardson_steps", "mg_cycles", "newton_maxit", "gmres_maxit"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1")

    @property
    def final_time(self):
        return self.n_steps * self.dt


@dataclass
class State:
    u: np.ndarray
    w: np.ndarray
    t: float = 0.0

    def copy(self):
        return State(self.u.copy(), self.w.copy(), self.t)


@dataclass
class IterationStats:
    """Solver statistics of one timestep."""

    step: int
    newton_iters: int = 0
    gmres_iters: list = field(default_factory=list)
    residual: float = float("nan")
    mass: float = float("nan")
    energy: float = float("nan")
    seconds: float = 0.0

    @property
    def total_gmres(self):
        return int(sum(self.gmres_iters))

    @property
    def avg_gmres(self):
        return self.total_gmres / self.newton_iters if self.newton_iters else 0.0


def avg_gmres_per_newton(stats):
    """Total GMRES iterations divided by total Newton iterations over a run."""
    newton = sum(s.newton_iters for s in stats)
    return sum(s.total_gmres for s in stats) / newton if newton else 0.0


class Problem:
    """Mesh, constant operators and the (iterate-independent) preconditioner."""

    def __init__(self, cfg, mesh=None):
        self.cfg = cfg
        self.mesh = mesh if mesh is not None else build_mesh(cfg.dim, cfg.n)
        self.ops = assemble_operators(self.mesh)
        self.ctx = build_schur_context(
            self.ops, cfg.eps, cfg.dt, cfg.theta, cfg.sigma,
            cheby_iters=cfg.cheby_iters, richardson_steps=cfg.richardson_steps,
            mg_cycles=cfg.mg_cycles, pre_smooths=cfg.mg_pre_smooths,
            post_smooths=cfg.mg_post_smooths, mg_omega=cfg.mg_omega,
            min_coarse_size=cfg.min_coarse_size, cheby_precond=cfg.cheby_precond,
        )
        self.precond = BlockPreconditioner(self.ctx)


def cosine_perturbation(*coords):
    """Mean-zero perturbation ``prod_i cos(2 pi x_i) / 50`` with zero normal derivative."""
    out = 1.0 / 50.0
    for x in coords:
        out = out * np.cos(2 * np.pi * x)
    return out


def _mass_solve(ops, rhs, rtol=1e-12):
    x, info = cg(ops.M, rhs, rtol=rtol, atol=0.0, maxiter=10 * ops.M.shape[0],
                 M=diags(1.0 / ops.M.diagonal()))
    if info != 0:
        raise NumericalFailure(f"mass-matrix CG did not converge (info={info})")
    return x


def initial_state(mesh, ops, cfg, perturbation=cosine_perturbation):
    """``u0 = m + p`` interpolated; ``w0`` from the constraint equation."""
    u0 = interpolate(mesh, lambda *x: cfg.m + perturbation(*x))
    rhs = cfg.eps**2 * (ops.K @ u0) + assemble_nonlinear(mesh, u0)
    w0 = _mass_solve(ops, rhs)
    return State(u0, w0, 0.0)


def residual(new, old, ops, cfg):
    """Discrete residual ``[R1, R2]`` of one theta-method step."""
    M, K, b = ops.M, ops.K, ops.b
    th, dt, sig, m = cfg.theta, cfg.dt, cfg.sigma, cfg.m
    R1 = M @ (new.u - old.u) + dt * (
        th * (K @ new.w + sig * (M @ new.u - m * b))
        + (1 - th) * (K @ old.w + sig * (M @ old.u - m * b))
    )
    R2 = M @ new.w - cfg.eps**2 * (K @ new.u) - assemble_nonlinear(ops.mesh, new.u)
    return R1, R2


def newton_solve(old, ops, precond, cfg, step=0):
    """Advance ``old`` by one timestep; raises :class:`StepFailure` on non-convergence."""
    t0 = time.perf_counter()
    stats = IterationStats(step=step)
    new = State(old.u.copy(), old.w.copy(), old.t + cfg.dt)
    ctx = precond.ctx
    n = ops.M.shape[0]

    R = np.concatenate(residual(new, old, ops, cfg))
    rnorm = np.linalg.norm(R)
    target = cfg.newton_tol * max(1.0, rnorm)
    while rnorm > target:
        if stats.newton_iters >= cfg.newton_maxit:
            stats.residual = rnorm
            stats.seconds = time.perf_counter() - t0
            raise StepFailure(
                f"Newton did not converge in {cfg.newton_maxit} iterations at step {step} "
                f"(residual {rnorm:.3e})", stats)
        M_E = assemble_coefficient_mass(ops.mesh, new.u)
        precond.update(M_E)
        J = newton_matrix(ctx, M_E)
        result = gmres(J, -R, right_precond=precond.as_operator(), rel_tol=cfg.gmres_tol,
                       max_iter=cfg.gmres_maxit, restart=cfg.gmres_restart)
        if not result.converged:
            log.warning("GMRES stopped at %d iterations without converging (step %d)",
                        result.iterations, step)
        stats.newton_iters += 1
        stats.gmres_iters.append(result.iterations)
        new.u += result.x[:n]
        new.w += result.x[n:]
        R = np.concatenate(residual(new, old, ops, cfg))
        rnorm = np.linalg.norm(R)
        if not np.isfinite(rnorm):
            raise StepFailure(f"non-finite residual at step {step}", stats)

    stats.residual = rnorm
    stats.mass = total_mass(ops, new.u)
    if cfg.compute_energy:
        stats.energy = energy(ops.mesh, ops, new.u, cfg)
    stats.seconds = time.perf_counter() - t0
    return new, stats


def advance(state, problem, step=0):
    return newton_solve(state, problem.ops, problem.precond, problem.cfg, step)


def run_simulation(cfg, problem=None, callback=None):
    """Run ``cfg.n_steps`` timesteps from the standard initial condition.

    ``callback(step, state, stats)`` is invoked after initialisation (with
    ``stats=None``) and after every step. Returns ``(final_state, stats_list)``.
    """
    problem = problem if problem is not None else Problem(cfg)
    state = initial_state(problem.mesh, problem.ops, cfg)
    if callback is not None:
        callback(0, state, None)
    history = []
    for k in range(1, cfg.n_steps + 1):
        state, stats = advance(state, problem, k)
        history.append(stats)
        log.info("step %d: newton %d, gmres %s, mass %.12f", k, stats.newton_iters,
                 stats.gmres_iters, stats.mass)
        if callback is not None:
            callback(k, state, stats)
    return state, history


def total_mass(ops, u):
    return float(ops.b @ u)


def energy(mesh, ops, u, cfg, mass_tol=1e-6):
    """Discrete Ohta-Kawasaki free energy.

    The nonlocal term ``sigma/2 * ||(-Delta_N)^{-1/2}(u - m)||^2`` is
    ``sigma/2 * phi^T (M u - m b)`` with ``K phi = M u - m b``; this is only
    solvable when ``u`` has mean ``m``.
    """
    u = np.asarray(u, dtype=float)
    grad = 0.5 * cfg.eps**2 * float(u @ (ops.K @ u))
    well = 0.25 * integrate_double_well(mesh, u)
    if cfg.sigma == 0:
        return grad + well
    f = ops.M @ u - cfg.m * ops.b
    defect = f.sum()
    if abs(defect) > mass_tol:
        raise InconsistentStateError(
            f"mean of u differs from m by {defect:.3e}; nonlocal term undefined")
    f -= defect * ops.b
    if not np.any(f):
        return grad + well
    phi, info = cg(ops.K, f, rtol=1e-10, atol=0.0, maxiter=20 * len(f))
    if info != 0:
        raise NumericalFailure(f"Neumann Poisson solve did not converge (info={info})")
    return grad + well + 0.5 * cfg.sigma * float(phi @ f)
