import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from okflow.assembly import (
    assemble_coefficient_mass,
    assemble_load,
    assemble_mass,
    assemble_nonlinear,
    assemble_operators,
    assemble_stiffness,
    integrate_double_well,
    interpolate,
)
from okflow.errors import InvalidArgumentError
from okflow.linalg import check_symmetric
from okflow.mesh import build_mesh


def moment(alpha, dim, vol):
    """Exact integral of prod lambda_i^alpha_i over a simplex of volume ``vol``."""
    num = math.factorial(dim) * math.prod(math.factorial(a) for a in alpha)
    return vol * num / math.factorial(sum(alpha) + dim)


def bary_integral(idx, dim, vol):
    alpha = [0] * (dim + 1)
    for i in idx:
        alpha[i] += 1
    return moment(alpha, dim, vol)


def reference_matrices(mesh, u):
    """Dense M, K, M_E, N(u) and the double-well integral by exact moment expansion."""
    nv, d = mesh.num_vertices, mesh.dim
    k = d + 1
    M = np.zeros((nv, nv))
    K = np.zeros((nv, nv))
    ME = np.zeros((nv, nv))
    N = np.zeros(nv)
    well = 0.0
    for cell in mesh.cells:
        X = mesh.vertices[cell]
        T = (X[1:] - X[0]).T
        vol = abs(np.linalg.det(T)) / math.factorial(d)
        Tinv = np.linalg.inv(T)
        grads = np.vstack([-Tinv.sum(axis=0), Tinv])
        uc = u[cell]
        for i, j in product(range(k), repeat=2):
            M[cell[i], cell[j]] += bary_integral((i, j), d, vol)
            K[cell[i], cell[j]] += vol * grads[i] @ grads[j]
            val = -bary_integral((i, j), d, vol)
            for a, b in product(range(k), repeat=2):
                val += 3 * uc[a] * uc[b] * bary_integral((a, b, i, j), d, vol)
            ME[cell[i], cell[j]] += val
        for i in range(k):
            val = 0.0
            for a in range(k):
                val -= uc[a] * bary_integral((a, i), d, vol)
                for b, c in product(range(k), repeat=2):
                    val += uc[a] * uc[b] * uc[c] * bary_integral((a, b, c, i), d, vol)
            N[cell[i]] += val
        # (1 - u^2)^2 = 1 - 2 u^2 + u^4
        well += vol
        for a, b in product(range(k), repeat=2):
            well -= 2 * uc[a] * uc[b] * bary_integral((a, b), d, vol)
        for a, b, c, e in product(range(k), repeat=4):
            well += uc[a] * uc[b] * uc[c] * uc[e] * bary_integral((a, b, c, e), d, vol)
    return M, K, ME, N, well


@pytest.mark.parametrize("dim,n", [(2, 3), (3, 2)])
def test_against_moment_oracle(dim, n):
    mesh = build_mesh(dim, n)
    u = np.random.default_rng(dim * 10 + n).uniform(-1.2, 1.2, mesh.num_vertices)
    M, K, ME, N, well = reference_matrices(mesh, u)
    scale = np.abs(M).max()
    assert np.allclose(assemble_mass(mesh).toarray(), M, rtol=0, atol=1e-14 * scale)
    assert np.allclose(assemble_stiffness(mesh).toarray(), K, rtol=0, atol=1e-13 * np.abs(K).max())
    assert np.allclose(assemble_coefficient_mass(mesh, u).toarray(), ME, rtol=0, atol=1e-13 * scale)
    assert np.allclose(assemble_nonlinear(mesh, u), N, rtol=0, atol=1e-13 * np.abs(N).max())
    assert integrate_double_well(mesh, u) == pytest.approx(well, rel=1e-12)


@pytest.mark.parametrize("dim,n", [(2, 4), (3, 3)])
def test_mass_stiffness_identities(dim, n):
    mesh = build_mesh(dim, n)
    ops = assemble_operators(mesh)
    one = np.ones(mesh.num_vertices)
    assert one @ ops.M @ one == pytest.approx(1.0, abs=1e-14)
    assert np.abs(ops.K @ one).max() < 1e-12
    x = interpolate(mesh, lambda *c: c[0])
    assert x @ ops.K @ x == pytest.approx(1.0, abs=1e-12)
    assert ops.b.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(ops.M @ one, ops.b)
    check_symmetric(ops.M)
    check_symmetric(ops.K)


@pytest.mark.parametrize("value,factor", [(0.0, -1.0), (1.0, 2.0), (-1.0, 2.0)])
def test_coefficient_mass_constant_fields(value, factor):
    mesh = build_mesh(2, 4)
    M = assemble_mass(mesh)
    ME = assemble_coefficient_mass(mesh, np.full(mesh.num_vertices, value))
    assert abs(ME - factor * M).max() < 1e-16


def test_constant_nonlinear_term():
    mesh = build_mesh(2, 3)
    m = 0.4
    N = assemble_nonlinear(mesh, np.full(mesh.num_vertices, m))
    assert np.allclose(N, (m**3 - m) * assemble_load(mesh), atol=1e-16)
    assert integrate_double_well(mesh, np.full(mesh.num_vertices, m)) == pytest.approx(
        (1 - m**2) ** 2, rel=1e-13)


@settings(max_examples=20, deadline=None)
@given(u=arrays(np.float64, 16, elements=st.floats(-1.5, 1.5)))
def test_coefficient_mass_symmetric_and_deterministic(u):
    mesh = build_mesh(2, 3)
    ME = assemble_coefficient_mass(mesh, u)
    check_symmetric(ME)
    again = assemble_coefficient_mass(mesh, u.copy())
    assert np.array_equal(ME.data, again.data)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_derivative_relations(seed):
    # N is the gradient of a quarter of the double-well integral, and M_E the Jacobian of N
    mesh = build_mesh(2, 3)
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1, 1, mesh.num_vertices)
    v = rng.standard_normal(mesh.num_vertices)
    tau = 1e-6
    dwell = (integrate_double_well(mesh, u + tau * v)
             - integrate_double_well(mesh, u - tau * v)) / (8 * tau)
    assert dwell == pytest.approx(assemble_nonlinear(mesh, u) @ v, rel=1e-6, abs=1e-10)
    dN = (assemble_nonlinear(mesh, u + tau * v) - assemble_nonlinear(mesh, u - tau * v)) / (2 * tau)
    assert np.allclose(dN, assemble_coefficient_mass(mesh, u) @ v, rtol=1e-6, atol=1e-9)


def test_bad_vector_length():
    mesh = build_mesh(2, 2)
    with pytest.raises(InvalidArgumentError):
        assemble_coefficient_mass(mesh, np.zeros(4))


def test_interpolate_constant_and_nonfinite():
    mesh = build_mesh(3, 2)
    assert np.all(interpolate(mesh, lambda x, y, z: 0.4) == 0.4)
    with pytest.raises(InvalidArgumentError):
        interpolate(mesh, lambda x, y, z: np.where(x > 0.5, np.nan, 0.0))


def test_cosine_perturbation_integral_tends_to_zero():
    vals = []
    for n in (4, 8, 16):
        mesh = build_mesh(3, n)
        p = interpolate(mesh, lambda x, y, z: np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
                        * np.cos(2 * np.pi * z) / 50)
        vals.append(abs(assemble_load(mesh) @ p))
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-3
