import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from panelcup.errors import EmptyKernelSupport, LagOutOfRange, SingularOmegaB
from panelcup.lrcov import (
    KernelSpec,
    autocov,
    build_wbar,
    build_wbar_batch,
    lr_cov,
    plus_transform,
)

ALTERNATING = np.array([1.0, -1.0, 1.0, -1.0])
kernels = st.sampled_from(["bartlett", "parzen", "quadratic_spectral"])


def _direct_gamma(w, j):
    """Double-loop autocovariance, negative lags allowed."""
    S, m = w.shape
    out = np.zeros((m, m))
    for t in range(S):
        if 0 <= t + j < S:
            out += np.outer(w[t + j], w[t])
    return out / S


class TestKernelSpec:
    def test_weights_at_zero_are_one(self):
        for kind in ("bartlett", "parzen", "qs"):
            assert KernelSpec(kind).weight(0.0) == 1.0

    @given(kernels, st.floats(-3, 3))
    def test_symmetric(self, kind, x):
        k = KernelSpec(kind)
        assert_allclose(k.weight(x), k.weight(-x), rtol=1e-14)

    def test_bartlett_truncation(self):
        lags, w = KernelSpec("bartlett", 5).lag_weights(40)
        assert_array_equal(lags, [0, 1, 2, 3, 4])
        assert_allclose(w, [1.0, 0.8, 0.6, 0.4, 0.2])

    def test_parzen_values(self):
        assert_allclose(KernelSpec("parzen").weight([0.25, 0.75, 1.5]), [0.71875, 0.03125, 0.0])

    def test_alias(self):
        assert KernelSpec("qs").kind == "quadratic_spectral"

    def test_power_rule(self):
        assert KernelSpec.power_rule("bartlett", 100, 0.25).bandwidth == 3.0

    @pytest.mark.parametrize("bw", [0.0, -1.0, float("nan")])
    def test_bad_bandwidth(self, bw):
        with pytest.raises(EmptyKernelSupport):
            KernelSpec("bartlett", bw)


class TestAutocov:
    def test_alternating(self):
        assert_allclose(autocov(ALTERNATING, 0), [[1.0]])
        assert_allclose(autocov(ALTERNATING, 1), [[-0.75]])

    def test_divisor_is_full_length(self):
        assert_allclose(autocov(np.ones(5), 4), [[0.2]])

    def test_matches_double_loop(self, rng):
        w = rng.standard_normal((30, 3))
        for j in range(4):
            assert_allclose(autocov(w, j), _direct_gamma(w, j), atol=1e-12)

    def test_out_of_range(self):
        with pytest.raises(LagOutOfRange):
            autocov(ALTERNATING, 4)


class TestLongRunCov:
    def test_bartlett_k2(self):
        lrc = lr_cov(ALTERNATING, KernelSpec("bartlett", 2.0))
        assert_allclose(lrc.omega, [[0.25]])
        assert_allclose(lrc.delta, [[0.625]])

    def test_tiny_bandwidth_gives_gamma0(self, rng):
        w = rng.standard_normal((25, 2))
        lrc = lr_cov(w, KernelSpec("bartlett", 1e-6))
        assert_allclose(lrc.omega, autocov(w, 0))
        assert_allclose(lrc.delta, autocov(w, 0))

    def test_two_sided_oracle(self, rng):
        w = rng.standard_normal((40, 3))
        kern = KernelSpec("parzen", 6.0)
        omega = sum(float(kern.weight(j / 6.0)) * _direct_gamma(w, j) for j in range(-39, 40))
        delta = sum(float(kern.weight(j / 6.0)) * _direct_gamma(w, j) for j in range(0, 40))
        lrc = lr_cov(w, kern)
        assert_allclose(lrc.omega, omega, atol=1e-12)
        assert_allclose(lrc.delta, delta, atol=1e-12)

    def test_delta_orientation(self):
        # u leads e by one period: e_t = u_{t-1}
        u = np.array([1.0, 2.0, -1.0, 0.5, 3.0, -2.0])
        e = np.concatenate([[0.0], u[:-1]])
        lrc = lr_cov(np.column_stack([u, e]), KernelSpec("bartlett", 2.0))
        lag1 = np.dot(e[1:], u[:-1]) / 6
        lag1_rev = np.dot(u[1:], e[:-1]) / 6
        g0 = np.dot(u, e) / 6
        assert_allclose(lrc.delta[1, 0], g0 + 0.5 * lag1)
        assert_allclose(lrc.delta[0, 1], g0 + 0.5 * lag1_rev)

    @given(kernels, st.floats(0.5, 12.0), st.integers(0, 2**32 - 1))
    def test_omega_delta_identity(self, kind, bw, seed):
        w = np.random.default_rng(seed).standard_normal((30, 3))
        lrc = lr_cov(w, KernelSpec(kind, bw))
        assert_allclose(lrc.omega, lrc.delta + lrc.delta.T - lrc.gamma0, atol=1e-10)
        assert_allclose(lrc.omega, lrc.omega.T, atol=1e-12)

    @given(st.sampled_from(["bartlett", "parzen"]), st.floats(0.5, 12.0), st.integers(0, 2**32 - 1))
    def test_positive_semidefinite(self, kind, bw, seed):
        w = np.random.default_rng(seed).standard_normal((20, 3))
        eig = np.linalg.eigvalsh(lr_cov(w, KernelSpec(kind, bw)).omega)
        assert eig.min() > -1e-10

    @given(st.floats(0.1, 10.0), st.integers(0, 2**32 - 1))
    def test_scaling(self, c, seed):
        w = np.random.default_rng(seed).standard_normal((15, 2))
        kern = KernelSpec("bartlett", 4.0)
        assert_allclose(lr_cov(c * w, kern).omega, c**2 * lr_cov(w, kern).omega, rtol=1e-10, atol=1e-12)

    def test_ar1_long_run_variance(self):
        rng = np.random.default_rng(3)
        e = rng.standard_normal(20000)
        w = np.empty_like(e)
        w[0] = e[0]
        for t in range(1, e.size):
            w[t] = 0.5 * w[t - 1] + e[t]
        omega = lr_cov(w, KernelSpec("bartlett", 40.0)).omega[0, 0]
        assert abs(omega - 4.0) < 0.4


class TestBuildWbar:
    def test_single_unit_has_zero_dxbar(self, rng):
        dx = rng.standard_normal((1, 5, 1))
        out = build_wbar_batch(rng.standard_normal((1, 6)), dx, rng.standard_normal((5, 1)), np.ones((1, 1)))
        assert_array_equal(out[0, :, 1], 0.0)

    def test_zero_weights_keep_dx(self, rng):
        dx = rng.standard_normal((3, 5, 2))
        out = build_wbar_batch(rng.standard_normal((3, 6)), dx, rng.standard_normal((5, 1)), np.zeros((3, 3)))
        assert_array_equal(out[:, :, 1:3], dx)

    def test_double_loop_and_single_unit(self, rng):
        n, S, k = 2, 6, 1
        u = rng.standard_normal((n, S + 1))
        dx = rng.standard_normal((n, S, k))
        dF = rng.standard_normal((S, 1))
        a = rng.standard_normal((n, n))
        batch = build_wbar_batch(u, dx, dF, a)
        for i in range(n):
            for t in range(S):
                bar = dx[i, t, 0] - sum(a[i, j] * dx[j, t, 0] for j in range(n)) / n
                assert_allclose(batch[i, t], [u[i, t + 1], bar, dF[t, 0]], atol=1e-14)
            assert_allclose(build_wbar(u[i], dx[i], dx, dF, a[i]), batch[i], atol=1e-14)


class TestPlusTransform:
    def _lrc(self, omega, delta):
        from panelcup.lrcov import BlockLayout, LongRunCov

        return LongRunCov(np.asarray(omega, float), np.asarray(delta, float), np.eye(3), BlockLayout(1, 1))

    def test_hand_case(self):
        omega = np.array([[2.0, 0.5, 0.2], [0.5, 1.0, 0.0], [0.2, 0.0, 2.0]])
        delta = np.array([[1.0, 0.3, 0.1], [0.4, 0.6, 0.2], [0.1, 0.1, 1.2]])
        pt = plus_transform(self._lrc(omega, delta))
        coeff = np.array([0.5, 0.1])
        assert_allclose(pt.endo_coeff, coeff)
        assert_allclose(pt.omega_u_dot_b, 2.0 - 0.25 - 0.02)
        assert_allclose(pt.delta_eps_u_plus, [0.4 - (0.6 * 0.5 + 0.2 * 0.1)])
        assert_allclose(pt.delta_eta_u_plus, [0.1 - (0.1 * 0.5 + 1.2 * 0.1)])

    def test_no_long_run_correlation(self):
        omega = np.diag([2.0, 1.0, 1.0])
        delta = np.array([[1.0, 0.0, 0.0], [0.7, 0.5, 0.1], [0.2, 0.0, 0.5]])
        pt = plus_transform(self._lrc(omega, delta))
        assert_array_equal(pt.endo_coeff, 0.0)
        assert_allclose(pt.delta_eps_u_plus, [0.7])
        assert_allclose(pt.omega_u_dot_b, 2.0)

    def test_perfect_correlation(self, rng):
        e = rng.standard_normal((200, 2))
        w = np.column_stack([e @ [1.5, -0.5], e])
        pt = plus_transform(lr_cov(w, KernelSpec("bartlett", 3.0), k=1, r=1))
        assert abs(pt.omega_u_dot_b) < 1e-10
        assert_allclose(pt.endo_coeff, [1.5, -0.5], atol=1e-10)

    def test_singular(self, rng):
        e = rng.standard_normal(100)
        w = np.column_stack([rng.standard_normal(100), e, 2.0 * e])
        with pytest.raises(SingularOmegaB):
            plus_transform(lr_cov(w, KernelSpec(), k=1, r=1))
