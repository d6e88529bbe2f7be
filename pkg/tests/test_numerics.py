import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phnlink.exceptions import DimensionError, SingularMatrixError
from phnlink.numerics import (
    circular_convolve,
    dft,
    dft_matrix,
    idft,
    regularized_solve,
)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestDft:
    def test_impulse_is_flat(self):
        out = dft([1, 0, 0, 0], 4)
        assert np.allclose(out, np.full(4, 0.5))

    def test_round_trip(self):
        rng = np.random.default_rng(1)
        x = crandn(rng, 64)
        assert np.abs(idft(dft(x)) - x).max() < 1e-10

    def test_single_tone(self):
        n = 4
        x = np.exp(2j * np.pi * np.arange(n) / n) / np.sqrt(n)
        out = dft(x, n)
        assert np.allclose(out, [0, 1, 0, 0], atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            dft([1, 2, 3], 4)

    def test_non_finite_rejected(self):
        with pytest.raises(DimensionError):
            dft([1.0, np.nan, 0.0, 0.0], 4)

    def test_matrix_matches_fft(self):
        rng = np.random.default_rng(2)
        x = crandn(rng, 8)
        assert np.allclose(dft_matrix(8) @ x, dft(x))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=1, max_value=64), st.integers(min_value=0, max_value=2**31))
    def test_parseval(self, n, seed):
        x = crandn(np.random.default_rng(seed), n)
        assert abs(np.linalg.norm(dft(x)) - np.linalg.norm(x)) < 1e-10

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=1, max_value=64), st.integers(min_value=0, max_value=2**31))
    def test_unitarity(self, n, seed):
        x = crandn(np.random.default_rng(seed), n)
        assert np.abs(idft(dft(x)) - x).max() < 1e-10


class TestCircularConvolve:
    def test_identity_kernel(self):
        assert np.allclose(circular_convolve([1, 2, 3, 4], [1, 0, 0, 0]), [1, 2, 3, 4])

    def test_shift_kernel(self):
        assert np.allclose(circular_convolve([1, 0, 0, 0], [0, 1, 0, 0]), [0, 1, 0, 0])

    def test_matches_direct_sum(self):
        rng = np.random.default_rng(3)
        a = crandn(rng, 8)
        b = crandn(rng, 8)
        direct = np.array([
            sum(a[l] * b[(n - l) % 8] for l in range(8)) for n in range(8)
        ])
        assert np.abs(circular_convolve(a, b) - direct).max() < 1e-10

    def test_dft_domain_product(self):
        rng = np.random.default_rng(4)
        a = crandn(rng, 16)
        b = crandn(rng, 16)
        c = circular_convolve(a, b)
        assert np.abs(dft(c) - np.sqrt(16) * dft(a) * dft(b)).max() < 1e-10

    def test_short_kernel_zero_padded(self):
        rng = np.random.default_rng(5)
        a = crandn(rng, 8)
        b = crandn(rng, 3)
        padded = np.concatenate([b, np.zeros(5)])
        assert np.allclose(circular_convolve(a, b), circular_convolve(a, padded))

    def test_empty_rejected(self):
        with pytest.raises(DimensionError):
            circular_convolve([], [1.0])


class TestRegularizedSolve:
    def test_identity_system(self):
        y = np.array([1.0, 2.0, 3.0, 4.0], dtype=complex)
        assert np.allclose(regularized_solve(np.eye(4), y, 0.0), y)

    def test_scalar_shrinkage(self):
        y = np.array([2.0, -1.0, 0.5, 1j])
        sigma2 = 0.25
        out = regularized_solve(np.eye(4), y, sigma2)
        assert np.allclose(out, y / (1 + sigma2))

    def test_matches_explicit_inverse(self):
        rng = np.random.default_rng(6)
        a = crandn(rng, 8, 8) + 4 * np.eye(8)
        y = crandn(rng, 8)
        oracle = np.linalg.inv(a.conj().T @ a) @ (a.conj().T @ y)
        assert np.abs(regularized_solve(a, y, 0.0) - oracle).max() < 1e-8

    def test_normal_equation_residual(self):
        rng = np.random.default_rng(7)
        a = crandn(rng, 12, 6)
        y = crandn(rng, 12)
        lam = 0.3
        x = regularized_solve(a, y, lam)
        gram = a.conj().T @ a + lam * np.eye(6)
        rhs = a.conj().T @ y
        assert np.linalg.norm(gram @ x - rhs) < 1e-8 * np.linalg.norm(rhs)

    def test_lambda_to_zero_limit(self):
        rng = np.random.default_rng(8)
        a = crandn(rng, 10, 5)
        y = crandn(rng, 10)
        x0 = regularized_solve(a, y, 0.0)
        x_eps = regularized_solve(a, y, 1e-12)
        assert np.linalg.norm(x_eps - x0) < 1e-6

    def test_singular_raises(self):
        a = np.ones((4, 2), dtype=complex)  # rank 1
        with pytest.raises(SingularMatrixError):
            regularized_solve(a, np.ones(4), 0.0)

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError):
            regularized_solve(np.eye(2), np.ones(2), -1.0)
