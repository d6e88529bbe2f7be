import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phnlink.channel import draw_mimo_channel, PowerDelayProfile
from phnlink.exceptions import ConfigError, DimensionError
from phnlink.phase_noise import (
    PhnTrajectory,
    draw_pair_set,
    draw_wiener,
    pair_phn,
    rereference,
    spectral_coeffs,
)
from phnlink.phy import synthesize_rx


class TestDrawWiener:
    def test_zero_variance_constant(self):
        traj = draw_wiener(np.random.default_rng(0), 16, 0.0, theta0=0.3)
        assert np.allclose(traj.theta, 0.3)

    def test_determinism(self):
        a = draw_wiener(np.random.default_rng(9), 64, 1e-4)
        b = draw_wiener(np.random.default_rng(9), 64, 1e-4)
        assert np.array_equal(a.theta, b.theta)

    def test_variance_growth(self):
        n = 64
        rng = np.random.default_rng(1)
        finals = np.array([
            draw_wiener(rng, n, 1e-4).theta[-1] for _ in range(10_000)
        ])
        var = finals.var()
        expected = (n - 1) * 1e-4
        assert abs(var - expected) < 0.05 * expected

    def test_negative_variance_rejected(self):
        with pytest.raises(ConfigError):
            draw_wiener(np.random.default_rng(0), 8, -1e-4)


class TestPairPhn:
    def test_zero_partner_identity(self):
        a = draw_wiener(np.random.default_rng(0), 32, 1e-4)
        zero = PhnTrajectory(theta=np.zeros(32), sigma2_delta=0.0)
        assert np.array_equal(pair_phn(a, zero).theta, a.theta)

    def test_constants_add(self):
        a = PhnTrajectory(theta=np.full(8, 0.2), sigma2_delta=0.0)
        b = PhnTrajectory(theta=np.full(8, -0.5), sigma2_delta=0.0)
        assert np.allclose(pair_phn(a, b).theta, -0.3)

    def test_variance_addition(self):
        rng = np.random.default_rng(2)
        n = 64
        increments = []
        for _ in range(10_000):
            c = pair_phn(draw_wiener(rng, n, 1e-5), draw_wiener(rng, n, 1e-5))
            increments.extend(np.diff(c.theta)[:4])
        var = np.var(increments)
        assert abs(var - 2e-5) < 0.05 * 2e-5
        assert c.sigma2_delta == 2e-5

    def test_length_mismatch(self):
        a = PhnTrajectory(theta=np.zeros(8), sigma2_delta=0.0)
        b = PhnTrajectory(theta=np.zeros(9), sigma2_delta=0.0)
        with pytest.raises(DimensionError):
            pair_phn(a, b)


class TestRereference:
    def test_constant(self):
        traj = PhnTrajectory(theta=np.full(3, 0.2), sigma2_delta=0.0)
        prime, phi0 = rereference(traj)
        assert np.allclose(prime.theta, 0.0)
        assert phi0 == pytest.approx(0.2)

    def test_already_zero(self):
        traj = draw_wiener(np.random.default_rng(0), 16, 1e-4, theta0=0.0)
        prime, phi0 = rereference(traj)
        assert phi0 == 0.0
        assert np.array_equal(prime.theta, traj.theta)

    def test_synthesis_equivalence(self):
        # (theta, H) and (theta - theta0, e^{j theta0} H) give the same signal.
        rng = np.random.default_rng(3)
        n = 16
        chan = draw_mimo_channel(rng, 1, 1, PowerDelayProfile(), n)
        traj = draw_wiener(rng, n, 1e-3, theta0=0.7)
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        y_orig = synthesize_rx(x, chan, traj.theta[None, None, :], 0.0)

        prime, phi0 = rereference(traj)
        from phnlink.channel import ChannelRealization

        chan_eff = ChannelRealization(
            taps=chan.taps * np.exp(1j * phi0), freq=chan.freq * np.exp(1j * phi0)
        )
        y_prime = synthesize_rx(x, chan_eff, prime.theta[None, None, :], 0.0)
        assert np.abs(y_orig - y_prime).max() < 1e-12


class TestSpectralCoeffs:
    def test_zero_phase(self):
        j = spectral_coeffs(np.zeros(16))
        assert abs(j[0] - 1.0) < 1e-14
        assert np.abs(j[1:]).max() < 1e-14

    def test_constant_phase(self):
        phi = 0.4
        j = spectral_coeffs(np.full(16, phi))
        assert abs(j[0] - np.exp(1j * phi)) < 1e-14
        assert np.abs(j[1:]).max() < 1e-14

    def test_matches_direct_sum_and_parseval(self):
        rng = np.random.default_rng(4)
        theta = rng.standard_normal(8)
        j = spectral_coeffs(theta)
        n = 8
        direct = np.array([
            sum(np.exp(1j * theta[i]) * np.exp(-2j * np.pi * k * i / n) for i in range(n))
            for k in range(n)
        ]) / n
        assert np.abs(j - direct).max() < 1e-10
        assert abs(np.sum(np.abs(j) ** 2) - 1.0) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=1, max_value=128), st.integers(min_value=0, max_value=2**31))
    def test_parseval_property(self, n, seed):
        theta = np.random.default_rng(seed).standard_normal(n)
        j = spectral_coeffs(theta)
        assert abs(np.sum(np.abs(j) ** 2) - 1.0) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=2, max_value=128), st.integers(min_value=0, max_value=2**31))
    def test_cpe_magnitude_bound(self, n, seed):
        theta = 0.3 * np.random.default_rng(seed).standard_normal(n)
        j = spectral_coeffs(theta)
        assert np.abs(j[0]) <= 1.0 + 1e-12
        if np.ptp(theta) > 1e-6:
            assert np.abs(j[0]) < 1.0

    def test_zero_pair_identity_spectrum(self):
        zero = PhnTrajectory(theta=np.zeros(16), sigma2_delta=0.0)
        j = spectral_coeffs(pair_phn(zero, zero))
        assert abs(j[0] - 1.0) < 1e-14


class TestDrawPairSet:
    def test_shape_and_start(self):
        phn = draw_pair_set(np.random.default_rng(0), 2, 3, 32, 1e-4)
        assert phn.shape == (2, 3, 32)
        assert np.allclose(phn[:, :, 0], 0.0)

    def test_per_pair_convention_variance(self):
        rng = np.random.default_rng(1)
        incs = []
        for _ in range(4000):
            phn = draw_pair_set(rng, 1, 1, 16, 1e-4, convention="per_pair")
            incs.extend(np.diff(phn[0, 0]))
        assert abs(np.var(incs) - 1e-4) < 0.05e-4

    def test_per_oscillator_convention_doubles(self):
        rng = np.random.default_rng(2)
        incs = []
        for _ in range(4000):
            phn = draw_pair_set(rng, 1, 1, 16, 1e-4, convention="per_oscillator")
            incs.extend(np.diff(phn[0, 0]))
        assert abs(np.var(incs) - 2e-4) < 0.1e-4

    def test_unknown_convention(self):
        with pytest.raises(ConfigError):
            draw_pair_set(np.random.default_rng(0), 1, 1, 8, 1e-4, convention="nope")

    def test_shared_oscillator_correlation(self):
        # Pairs (v, m) and (v', m) share the receive oscillator.
        phn = draw_pair_set(np.random.default_rng(3), 2, 1, 4096, 1e-4)
        c = np.corrcoef(np.diff(phn[0, 0]), np.diff(phn[1, 0]))[0, 1]
        assert 0.3 < c < 0.7  # half the innovation power is common
