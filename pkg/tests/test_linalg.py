import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from panelcup.errors import NotPositiveDefinite, NotSymmetric, RankDeficientBasis, RankRequestTooLarge
from panelcup.linalg import projection_residual, solve_spd, sym_eig_top_r


def _random_spd(rng, m):
    A = rng.standard_normal((m, m))
    return A @ A.T + m * np.eye(m)


class TestSymEig:
    def test_diagonal(self):
        eig = sym_eig_top_r(np.diag([1.0, 3.0, 2.0]), 2)
        assert_allclose(eig.values, [3.0, 2.0])
        assert_allclose(eig.vectors, [[0, 0], [1, 0], [0, 1]], atol=1e-15)

    def test_sign_rule(self):
        v = np.array([0.6, -0.8, 0.0])
        eig = sym_eig_top_r(np.outer(v, v) * 5.0, 1)
        assert_allclose(eig.vectors[:, 0], -v, atol=1e-12)

    def test_sign_tie_uses_lowest_index(self):
        v = np.array([-1.0, 1.0]) / np.sqrt(2.0)
        eig = sym_eig_top_r(np.outer(v, v), 1)
        assert eig.vectors[0, 0] > 0

    def test_matches_reference(self, rng):
        S = _random_spd(rng, 8)
        eig = sym_eig_top_r(S, 3)
        ref = np.sort(np.linalg.eigvalsh(S))[::-1][:3]
        assert_allclose(eig.values, ref, rtol=1e-12)
        assert_allclose(S @ eig.vectors, eig.vectors * eig.values, atol=1e-10)
        assert_allclose(eig.vectors.T @ eig.vectors, np.eye(3), atol=1e-12)

    def test_repeated_calls_bitwise_equal(self, rng):
        S = _random_spd(rng, 10)
        a, b = sym_eig_top_r(S, 4), sym_eig_top_r(S.copy(), 4)
        assert_array_equal(a.vectors, b.vectors)
        assert_array_equal(a.values, b.values)

    def test_not_symmetric(self):
        with pytest.raises(NotSymmetric):
            sym_eig_top_r(np.array([[1.0, 2.0], [0.0, 1.0]]), 1)

    def test_rank_request(self):
        with pytest.raises(RankRequestTooLarge):
            sym_eig_top_r(np.eye(3), 4)


class TestProjection:
    @given(st.integers(5, 30), st.integers(1, 3), st.integers(0, 2**32 - 1))
    def test_orthogonal_and_idempotent(self, T, r, seed):
        rng = np.random.default_rng(seed)
        F = rng.standard_normal((T, r))
        z = rng.standard_normal((T, 4))
        m = projection_residual(F, z)
        assert_allclose(F.T @ m, 0.0, atol=1e-9 * np.abs(z).sum())
        assert_allclose(projection_residual(F, m), m, atol=1e-10)

    def test_vector_input(self, rng):
        F = rng.standard_normal((10, 2))
        z = rng.standard_normal(10)
        assert_allclose(projection_residual(F, z), projection_residual(F, z[:, None])[:, 0])

    def test_matches_normal_equations(self, rng):
        F = rng.standard_normal((12, 2))
        z = rng.standard_normal(12)
        ref = z - F @ np.linalg.solve(F.T @ F, F.T @ z)
        assert_allclose(projection_residual(F, z), ref, atol=1e-12)

    def test_rank_deficient(self, rng):
        f = rng.standard_normal(10)
        with pytest.raises(RankDeficientBasis):
            projection_residual(np.column_stack([f, 2 * f]), rng.standard_normal(10))


class TestSolveSpd:
    def test_solution(self, rng):
        A = _random_spd(rng, 5)
        B = rng.standard_normal((5, 2))
        assert_allclose(A @ solve_spd(A, B), B, atol=1e-10)

    def test_not_pd(self):
        with pytest.raises(NotPositiveDefinite):
            solve_spd(np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones(2))
