import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from okflow.assembly import assemble_operators
from okflow.errors import ConfigurationError
from okflow.instrument import COUNTERS
from okflow.linalg import make_operator, richardson
from okflow.mesh import build_mesh, prolongation
from okflow.multigrid import apply_shat_inv, build_hierarchy, v_cycle
from okflow.precond import compute_c

# eps = 0.02, dt = eps^2, theta = 0.5, sigma = 100
EPS_SQRT_C = 0.02 * math.sqrt(compute_c(0.0004, 0.5, 100.0))


def hierarchy(dim, n, min_coarse=100, scale=EPS_SQRT_C):
    mesh = build_mesh(dim, n)
    ops = assemble_operators(mesh)
    return build_hierarchy(mesh, ops.M, ops.K, scale, min_coarse_size=min_coarse), ops


def energy_error_factor(h, rng):
    A = h.levels[0].A
    b = rng.standard_normal(A.shape[0])
    x = spla.spsolve(A.tocsc(), b)
    e = x - v_cycle(h, b)
    return math.sqrt(e @ A @ e / (x @ A @ x))


def test_level_count():
    h, _ = hierarchy(2, 64)
    assert len(h) == 4
    assert [m.n for m in h.meshes] == [64, 32, 16, 8]
    assert h.size == 65**2


def test_galerkin_relation():
    h, _ = hierarchy(2, 8, min_coarse=10)
    for fine, coarse in zip(h.levels[:-1], h.levels[1:]):
        triple = (fine.P.T @ fine.A @ fine.P).toarray()
        scale = np.abs(triple).max()
        assert np.abs(triple - coarse.A.toarray()).max() <= 1e-12 * scale
    # coarse operators are the rediscretised ones up to round-off, since P1 spaces nest
    mesh = h.meshes[1]
    ops = assemble_operators(mesh)
    direct = (ops.M + EPS_SQRT_C * ops.K).toarray()
    assert np.allclose(h.levels[1].A.toarray(), direct, atol=1e-14)


def test_levels_spd(rng):
    h, _ = hierarchy(3, 8, min_coarse=20)
    for level in h.levels:
        V = rng.standard_normal((level.A.shape[0], 20))
        assert np.all(np.einsum("ij,ij->j", V, level.A @ V) > 0)


def test_zero_linear_symmetric(rng):
    h, _ = hierarchy(2, 16, min_coarse=30)
    n = h.size
    assert not np.any(v_cycle(h, np.zeros(n)))
    x, y = rng.standard_normal((2, n))
    assert np.allclose(v_cycle(h, 3 * x - y), 3 * v_cycle(h, x) - v_cycle(h, y), atol=1e-12)
    assert x @ v_cycle(h, y) == pytest.approx(y @ v_cycle(h, x), rel=1e-10)


@pytest.mark.parametrize("dim,n", [(2, 16), (2, 32), (3, 8)])
def test_contraction(rng, dim, n):
    h, _ = hierarchy(dim, n, min_coarse=30)
    assert energy_error_factor(h, rng) < 0.5


def test_pure_mass_hierarchy(rng):
    h, ops = hierarchy(2, 32, min_coarse=30, scale=0.0)
    assert energy_error_factor(h, rng) < 0.2
    b = rng.standard_normal(h.size)
    x = apply_shat_inv(h, b, cycles=5)
    assert np.linalg.norm(b - ops.M @ x) <= 1e-3 * np.linalg.norm(b)


def test_cycles_are_richardson(rng):
    h, _ = hierarchy(2, 16, min_coarse=30)
    A = h.levels[0].A
    b = rng.standard_normal(h.size)
    ref = richardson(A, make_operator(h.size, lambda r: v_cycle(h, r)), b, 4)
    assert np.allclose(apply_shat_inv(h, b, cycles=4), ref, rtol=1e-13, atol=1e-15)
    assert np.array_equal(apply_shat_inv(h, b, cycles=1), v_cycle(h, b))


def test_five_cycles_accuracy(rng):
    h, _ = hierarchy(2, 32)
    A = h.levels[0].A
    b = rng.standard_normal(h.size)
    x = apply_shat_inv(h, b, cycles=5)
    assert np.linalg.norm(b - A @ x) <= 1e-3 * np.linalg.norm(b)


@settings(max_examples=15, deadline=None)
@given(alpha=st.floats(-1e4, 1e4), seed=st.integers(0, 1000))
def test_shat_inverse_homogeneous(alpha, seed):
    h, _ = hierarchy(2, 8, min_coarse=10)
    b = np.random.default_rng(seed).standard_normal(h.size)
    ref = alpha * apply_shat_inv(h, b)
    assert np.allclose(apply_shat_inv(h, alpha * b), ref, rtol=1e-12,
                       atol=1e-12 * np.abs(ref).max() + 1e-300)


def test_odd_mesh_coarse_limit():
    h, _ = hierarchy(2, 50, min_coarse=500)  # 50 -> 25 is odd, 676 unknowns solved directly
    assert [m.n for m in h.meshes] == [50, 25]
    mesh = build_mesh(2, 65)
    ops = assemble_operators(mesh)
    with pytest.raises(ConfigurationError):
        build_hierarchy(mesh, ops.M, ops.K, EPS_SQRT_C)


def test_construction_counted():
    before = COUNTERS["mg_hierarchy"], COUNTERS["shat_assembly"]
    hierarchy(2, 8)
    assert COUNTERS["mg_hierarchy"] == before[0] + 1
    assert COUNTERS["shat_assembly"] == before[1] + 1


def test_prolongation_stored_per_level():
    h, _ = hierarchy(2, 8, min_coarse=10)
    for k, level in enumerate(h.levels[:-1]):
        ref = prolongation(h.meshes[k + 1], h.meshes[k])
        assert (level.P != ref).nnz == 0
    assert h.levels[-1].P is None
