"""Collapsed-coordinate Gauss rules on the reference simplex."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from okflow.errors import InvalidArgumentError


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature on the reference simplex ``{x >= 0, sum(x) <= 1}``.

    ``points`` holds barycentric coordinates (lambda_0, ..., lambda_d) of each
    point; ``weights`` sum to the reference measure 1/d!.
    """

    dim: int
    degree: int
    points: np.ndarray
    weights: np.ndarray

    @property
    def measure(self):
        return 1.0 / math.factorial(self.dim)

    @property
    def cartesian(self):
        return self.points[:, 1:]


def _gauss_jacobi_01(npts, alpha):
    # nodes/weights for int_0^1 f(s) (1-s)^alpha ds
    x, w = roots_jacobi(npts, alpha, 0.0)
    return (1.0 + x) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def simplex_rule(dim, degree):
    """Conical-product rule exact for polynomials of total degree ``degree``.

    The simplex is mapped from the unit cube by collapsing coordinates; the
    Jacobian factors are absorbed into Gauss-Jacobi weights so that
    ``ceil((degree + 1) / 2)`` points per direction are exact.
    """
    if dim not in (2, 3):
        raise InvalidArgumentError(f"dim must be 2 or 3, got {dim!r}")
    if degree < 0:
        raise InvalidArgumentError("degree must be non-negative")
    q = max(1, math.ceil((degree + 1) / 2))
    if dim == 2:
        s, ws = _gauss_jacobi_01(q, 1.0)
        t, wt = _gauss_jacobi_01(q, 0.0)
        S, T = np.meshgrid(s, t, indexing="ij")
        x = S
        y = T * (1 - S)
        w = np.outer(ws, wt)
        cart = np.stack([x.ravel(), y.ravel()], axis=1)
    else:
        s, ws = _gauss_jacobi_01(q, 2.0)
        t, wt = _gauss_jacobi_01(q, 1.0)
        r, wr = _gauss_jacobi_01(q, 0.0)
        S, T, R = np.meshgrid(s, t, r, indexing="ij")
        x = S
        y = T * (1 - S)
        z = R * (1 - S) * (1 - T)
        w = ws[:, None, None] * wt[None, :, None] * wr[None, None, :]
        cart = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    bary = np.concatenate([1.0 - cart.sum(axis=1, keepdims=True), cart], axis=1)
    weights = w.ravel()
    bary.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(dim=dim, degree=degree, points=bary, weights=weights)
