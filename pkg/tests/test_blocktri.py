import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpe_ground.blocktri import (BlockTridiag, SingularBlockError, bicgstab, factor_block_lu,
                                 matvec, shift_diagonal, solve_block_lu)
from gpe_ground.grid import build_problem, PotentialSpec

from conftest import random_block_tridiag


def tridiag121(n):
    return BlockTridiag(np.full((n, 1, 1), 2.0), np.full((n - 1, 1, 1), -1.0), m_matrix=True)


def test_matvec_identity_blocks():
    M = BlockTridiag(np.ones((2, 1, 1)), np.zeros((1, 1, 1)))
    np.testing.assert_array_equal(matvec(M, np.array([3.0, 4.0])), [3.0, 4.0])


def test_matvec_tridiag_rowsums():
    np.testing.assert_array_equal(matvec(tridiag121(2), np.ones(2)), [1.0, 1.0])


def test_matvec_matches_dense(rng):
    M = random_block_tridiag(rng, 3, 2, spd=False)
    x = rng.standard_normal(6)
    np.testing.assert_allclose(matvec(M, x), M.to_dense() @ x, rtol=1e-12, atol=1e-12)


def test_matvec_dimension_mismatch():
    with pytest.raises(ValueError):
        matvec(tridiag121(3), np.ones(4))


def test_asymmetric_diag_block_rejected():
    with pytest.raises(ValueError):
        BlockTridiag(np.array([[[1.0, 2.0], [0.0, 1.0]]]), np.zeros((0, 2, 2)))


@settings(max_examples=60, deadline=None)
@given(m=st.integers(1, 5), p=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_matvec_property(m, p, seed):
    rng = np.random.default_rng(seed)
    M = random_block_tridiag(rng, m, p, spd=False)
    x = rng.standard_normal(M.n)
    ref = M.to_dense() @ x
    np.testing.assert_allclose(matvec(M, x), ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())


def test_shift_diagonal_scalar():
    M = BlockTridiag(np.array([[[2.0]]]), np.zeros((0, 1, 1)))
    assert shift_diagonal(M, np.array([1.0]), 0.5).to_dense()[0, 0] == 2.5


def test_shift_diagonal_zero_is_identity(rng):
    M = random_block_tridiag(rng, 3, 2)
    S = shift_diagonal(M, np.zeros(6), 0.0)
    assert np.abs(S.to_dense() - M.to_dense()).max() == 0.0


def test_shift_diagonal_matches_dense(rng):
    M = random_block_tridiag(rng, 3, 2)
    d = rng.standard_normal(6)
    ref = M.to_dense() + np.diag(d) - 0.7 * np.eye(6)
    assert np.abs(shift_diagonal(M, d, 0.7).to_dense() - ref).max() <= 1e-14


def test_shift_diagonal_preserves_m_matrix(rng):
    M = random_block_tridiag(rng, 4, 3, m_matrix=True)
    assert M.m_matrix and M.check_m_matrix()
    S = shift_diagonal(M, rng.random(12), -0.3)
    assert S.m_matrix and S.check_m_matrix()
    assert not shift_diagonal(M, rng.random(12), 0.3).m_matrix


def test_factor_identity():
    M = BlockTridiag(np.repeat(np.eye(3)[None], 4, axis=0), np.zeros((3, 3, 3)))
    F = factor_block_lu(M)
    np.testing.assert_array_equal(F.lower, 0.0)
    np.testing.assert_array_equal(F.upper_diag, np.repeat(np.eye(3)[None], 4, axis=0))
    b = np.arange(12.0)
    np.testing.assert_array_equal(solve_block_lu(F, b), b)


def test_solve_1d_laplacian_ones():
    # dense solve of tridiag(-1,2,-1) x = 1 gives (1.5, 2, 1.5)
    x = solve_block_lu(factor_block_lu(tridiag121(3)), np.ones(3))
    np.testing.assert_allclose(x, [1.5, 2.0, 1.5], rtol=1e-14)


def test_solve_1d_laplacian_unit():
    x = solve_block_lu(factor_block_lu(tridiag121(3)), np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(x, [0.75, 0.5, 0.25], rtol=1e-14)


def test_factor_reconstruction(rng):
    M = random_block_tridiag(rng, 4, 3)
    F = factor_block_lu(M)
    dense = M.to_dense()
    assert np.abs(F.reconstruct() - dense).max() <= 1e-10 * np.abs(dense).max()


def test_solve_2d_laplacian(rng):
    B = build_problem(2, 4, 0.0, PotentialSpec.zero(16)).B
    b = rng.standard_normal(16)
    x = solve_block_lu(factor_block_lu(B), b)
    ref = np.linalg.solve(B.to_dense(), b)
    assert np.linalg.norm(x - ref) <= 1e-10 * np.linalg.norm(ref)


def test_solve_multiple_rhs(rng):
    M = random_block_tridiag(rng, 3, 3)
    b = rng.standard_normal((9, 2))
    np.testing.assert_allclose(solve_block_lu(factor_block_lu(M), b), np.linalg.solve(M.to_dense(), b),
                               rtol=1e-10, atol=1e-12)


def test_solve_dimension_mismatch():
    with pytest.raises(ValueError):
        solve_block_lu(factor_block_lu(tridiag121(3)), np.ones(4))


def test_singular_block_reports_index():
    # tridiag(-1,2,-1) shifted by its smallest eigenvalue on a 2x2 system: [[1,-1],[-1,1]]
    M = BlockTridiag(np.full((2, 1, 1), 1.0), np.full((1, 1, 1), -1.0))
    with pytest.raises(SingularBlockError) as err:
        factor_block_lu(M)
    assert err.value.block == 1


@settings(max_examples=40, deadline=None)
@given(m=st.integers(1, 6), p=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_factor_solve_round_trip(m, p, seed):
    rng = np.random.default_rng(seed)
    M = random_block_tridiag(rng, m, p)
    b = rng.standard_normal(M.n)
    x = solve_block_lu(factor_block_lu(M), b)
    assert np.linalg.norm(matvec(M, x) - b) <= 1e-10 * np.linalg.norm(b)


def test_bicgstab_identity():
    b = np.array([1.0, -2.0, 3.0])
    x, st_ = bicgstab(lambda v: v, b, np.zeros(3), tol=1e-12, maxit=10)
    np.testing.assert_allclose(x, b)
    assert st_.converged and st_.iterations == 1


def test_bicgstab_matches_direct():
    M = tridiag121(10)
    b = np.ones(10)
    x, st_ = bicgstab(lambda v: matvec(M, v), b, np.zeros(10), tol=1e-10, maxit=200)
    ref = solve_block_lu(factor_block_lu(M), b)
    assert st_.converged
    assert np.linalg.norm(x - ref) <= 1e-8 * np.linalg.norm(ref)


def test_bicgstab_forced_nonconvergence():
    B = build_problem(2, 8, 0.0, PotentialSpec.zero(64)).B
    b = np.linspace(1.0, 2.0, 64)
    x, st_ = bicgstab(lambda v: matvec(B, v), b, np.zeros(64), tol=1e-10, maxit=1)
    assert not st_.converged
    assert st_.final_relative_residual > 1e-10
    assert np.isfinite(x).all()


def test_bicgstab_zero_rhs():
    x, st_ = bicgstab(lambda v: 2 * v, np.zeros(4))
    assert st_.converged and not x.any()


def test_bicgstab_status_consistent(rng):
    M = random_block_tridiag(rng, 4, 3)
    b = rng.standard_normal(12)
    x, st_ = bicgstab(lambda v: matvec(M, v), b, tol=1e-9, maxit=500)
    res = np.linalg.norm(b - matvec(M, x)) / np.linalg.norm(b)
    assert st_.converged and res <= 1e-9
    assert st_.final_relative_residual == pytest.approx(res)


@settings(max_examples=25, deadline=None)
@given(m=st.integers(1, 5), p=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_bicgstab_reproduces_block_lu_on_spd(m, p, seed):
    rng = np.random.default_rng(seed)
    M = random_block_tridiag(rng, m, p)
    b = rng.standard_normal(M.n)
    x, st_ = bicgstab(lambda v: matvec(M, v), b, tol=1e-12, maxit=1000)
    ref = solve_block_lu(factor_block_lu(M), b)
    assert np.linalg.norm(x - ref) <= 1e-8 * np.linalg.norm(ref)
