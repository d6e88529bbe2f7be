"""Quasi-static frequency-selective Rayleigh channels and AWGN.

A channel realization is drawn once per packet (group of pictures) and held
fixed while the packet is detected; the receiver is assumed to know it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DimensionError

# Exponentially decaying profile used by all default campaigns (dB per tap).
DEFAULT_PDP_DB = (-1.52, -6.75, -11.91, -17.08)


@dataclass(frozen=True)
class PowerDelayProfile:
    """Average tap powers in dB, ordered by delay."""

    avg_power_db: tuple[float, ...] = DEFAULT_PDP_DB

    def __post_init__(self):
        if len(self.avg_power_db) == 0:
            raise ConfigError("power delay profile must have at least one tap")
        powers = list(self.avg_power_db)
        if any(b > a + 1e-12 for a, b in zip(powers, powers[1:])):
            raise ConfigError("power delay profile must be non-increasing in delay")
        object.__setattr__(self, "avg_power_db", tuple(float(p) for p in powers))

    @property
    def num_taps(self) -> int:
        return len(self.avg_power_db)

    @property
    def linear(self) -> np.ndarray:
        """Tap powers on a linear scale."""
        return 10.0 ** (np.asarray(self.avg_power_db) / 10.0)

    @property
    def total_power(self) -> float:
        return float(self.linear.sum())


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of all (tx, rx) antenna-pair channels for a packet.

    taps[v, m, l] holds the l-th tap between transmit antenna v and receive
    antenna m; freq[v, m, n] = sum_l taps[v, m, l] exp(-j 2 pi n l / N) is the
    response on subcarrier n.  Arrays are frozen after construction (the
    channel is quasi-static for the packet lifetime).
    """

    taps: np.ndarray
    freq: np.ndarray

    def __post_init__(self):
        self.taps.setflags(write=False)
        self.freq.setflags(write=False)

    @property
    def num_tx(self) -> int:
        return self.taps.shape[0]

    @property
    def num_rx(self) -> int:
        return self.taps.shape[1]

    @property
    def num_subcarriers(self) -> int:
        return self.freq.shape[2]


def draw_channel(rng: np.random.Generator, num_taps: int, pdp: PowerDelayProfile) -> np.ndarray:
    """Draw one CIR: taps(l) ~ CN(0, pdp_linear(l)), independent across lags."""
    if num_taps == 0:
        raise ConfigError("channel needs at least one tap")
    if num_taps != pdp.num_taps:
        raise ConfigError(f"num_taps={num_taps} does not match profile length {pdp.num_taps}")
    scale = np.sqrt(pdp.linear / 2.0)
    return scale * (rng.standard_normal(num_taps) + 1j * rng.standard_normal(num_taps))


def freq_response(taps, n: int) -> np.ndarray:
    """Length-N frequency response H(k) = sum_l taps(l) exp(-j 2 pi k l / N).

    This equals sqrt(N) times the unitary DFT of the zero-padded taps; the
    plain-sum scaling is deliberate so that a single unit tap gives H == 1.
    """
    t = np.asarray(taps, dtype=np.complex128)
    if t.ndim != 1 or t.size == 0:
        raise DimensionError("taps must be a non-empty 1-D vector")
    if t.size > n:
        raise DimensionError(f"more taps ({t.size}) than subcarriers ({n})")
    return np.fft.fft(t, n)


def draw_mimo_channel(
    rng: np.random.Generator,
    num_tx: int,
    num_rx: int,
    pdp: PowerDelayProfile,
    num_subcarriers: int,
) -> ChannelRealization:
    """Draw independent CIRs for every (v, m) pair and cache their responses."""
    taps = np.empty((num_tx, num_rx, pdp.num_taps), dtype=np.complex128)
    for v in range(num_tx):
        for m in range(num_rx):
            taps[v, m] = draw_channel(rng, pdp.num_taps, pdp)
    freq = np.fft.fft(taps, num_subcarriers, axis=2)
    return ChannelRealization(taps=taps, freq=freq)


def add_awgn(signal, sigma2_w: float, rng: np.random.Generator) -> np.ndarray:
    """Add circularly-symmetric complex white Gaussian noise of variance sigma2_w."""
    if sigma2_w < 0:
        raise ConfigError(f"noise variance must be >= 0, got {sigma2_w}")
    x = np.asarray(signal, dtype=np.complex128)
    if sigma2_w == 0:
        return x.copy()
    noise = np.sqrt(sigma2_w / 2.0) * (
        rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
    )
    return x + noise


def noise_variance_for_snr(snr_db: float, num_tx: int, pdp: PowerDelayProfile) -> float:
    """AWGN variance realizing a given SNR.

    SNR is average received signal power per receive antenna over sigma2_w.
    With unit-energy constellations each transmit antenna contributes the
    profile's total power, so the expected receive power is num_tx * sum(pdp).
    """
    p_rx = num_tx * pdp.total_power
    return p_rx * 10.0 ** (-snr_db / 10.0)
