"""QAM mapping, OFDM modulation, the per-antenna frequency-modulation
transform, received-signal synthesis, and the CPE/ICI decomposition.

Every transmit antenna sends the same frequency-domain vector X, rotated by
a per-antenna diagonal phase ramp (a frequency modulation) that lets the
receiver separate the antenna contributions.  Synthesis offers two
independent routes (direct double sum and circular convolution) which must
agree to 1e-10; tests exercise the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channel import ChannelRealization, add_awgn
from .exceptions import ConfigError, DimensionError
from .numerics import as_cvec, circular_convolve, idft

SUPPORTED_QAM_ORDERS = (4, 16, 64)


@dataclass(frozen=True)
class OfdmConfig:
    """Static OFDM numerology for a campaign."""

    n_subcarriers: int = 64
    cp_len: int = 16
    qam_order: int = 16
    sample_rate_hz: float = 20e6

    def __post_init__(self):
        n = self.n_subcarriers
        if n < 2 or (n & (n - 1)) != 0:
            raise ConfigError(f"subcarrier count must be a power of two, got {n}")
        if not 0 <= self.cp_len < n:
            raise ConfigError(f"cp_len must be in [0, N), got {self.cp_len}")
        if self.qam_order not in SUPPORTED_QAM_ORDERS:
            raise ConfigError(f"unsupported QAM order {self.qam_order}")

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.qam_order))

    @property
    def symbol_duration_s(self) -> float:
        """Duration of one OFDM symbol including cyclic prefix."""
        return (self.n_subcarriers + self.cp_len) / self.sample_rate_hz


# ---------------------------------------------------------------------------
# QAM mapping
# ---------------------------------------------------------------------------

def _gray_pam(levels: int) -> np.ndarray:
    """Gray-ordered PAM amplitudes -(levels-1), ..., levels-1 indexed by bit value."""
    idx = np.arange(levels)
    gray = idx ^ (idx >> 1)
    amplitudes = np.empty(levels)
    amplitudes[gray] = 2 * idx - (levels - 1)
    return amplitudes


@lru_cache(maxsize=8)
def qam_constellation(order: int) -> np.ndarray:
    """Unit-average-energy Gray square QAM, indexed by the integer bit label.

    The label's high half addresses the in-phase axis, the low half the
    quadrature axis, MSB first.
    """
    if order not in SUPPORTED_QAM_ORDERS:
        raise ConfigError(f"unsupported QAM order {order}")
    half_bits = int(np.log2(order)) // 2
    side = 1 << half_bits
    pam = _gray_pam(side)
    labels = np.arange(order)
    points = pam[labels >> half_bits] + 1j * pam[labels & (side - 1)]
    points = points / np.sqrt(2.0 * (order - 1) / 3.0)
    points.setflags(write=False)
    return points


def bits_to_labels(bits: np.ndarray, bits_per_symbol: int) -> np.ndarray:
    b = np.asarray(bits, dtype=np.int64).reshape(-1, bits_per_symbol)
    weights = 1 << np.arange(bits_per_symbol - 1, -1, -1)
    return b @ weights


def labels_to_bits(labels: np.ndarray, bits_per_symbol: int) -> np.ndarray:
    shifts = np.arange(bits_per_symbol - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).reshape(-1).astype(np.int64)


def qam_map(bits, order: int) -> np.ndarray:
    """Map a bit vector (MSB-first per symbol) onto Gray QAM symbols."""
    bits = np.asarray(bits)
    k = int(np.log2(order))
    if bits.size % k != 0:
        raise ConfigError(f"bit count {bits.size} not divisible by log2({order})")
    return qam_constellation(order)[bits_to_labels(bits, k)]


def qam_hard_demap(symbols, order: int) -> np.ndarray:
    """Nearest-point decision back to bits."""
    sym = as_cvec(symbols)
    points = qam_constellation(order)
    labels = np.argmin(np.abs(sym[:, None] - points[None, :]) ** 2, axis=1)
    return labels_to_bits(labels, int(np.log2(order)))


def qam_slice(symbols, order: int) -> np.ndarray:
    """Nearest constellation point for each input symbol."""
    sym = as_cvec(symbols)
    points = qam_constellation(order)
    return points[np.argmin(np.abs(sym[:, None] - points[None, :]) ** 2, axis=1)]


def qam_llr(symbols, order: int, sigma2) -> np.ndarray:
    """Exact per-bit log-likelihood ratios, positive meaning bit 0.

    sigma2 is the complex noise variance per symbol, scalar or per-symbol
    array.  Computed by full marginalization over the constellation.
    """
    sym = as_cvec(symbols)
    k = int(np.log2(order))
    points = qam_constellation(order)
    s2 = np.broadcast_to(np.maximum(np.asarray(sigma2, dtype=np.float64), 1e-12), sym.shape)
    # metric[i, c] = -|y_i - p_c|^2 / sigma2_i
    metric = -np.abs(sym[:, None] - points[None, :]) ** 2 / s2[:, None]
    labels = np.arange(order)
    llrs = np.empty((sym.size, k))
    for b in range(k):
        mask0 = ((labels >> (k - 1 - b)) & 1) == 0
        m0 = _logsumexp(metric[:, mask0])
        m1 = _logsumexp(metric[:, ~mask0])
        llrs[:, b] = m0 - m1
    return llrs.reshape(-1)


def _logsumexp(m: np.ndarray) -> np.ndarray:
    peak = m.max(axis=1)
    return peak + np.log(np.exp(m - peak[:, None]).sum(axis=1))


# ---------------------------------------------------------------------------
# OFDM modulation
# ---------------------------------------------------------------------------

def ofdm_modulate(x_freq, cp_len: int) -> np.ndarray:
    """Unitary IDFT plus cyclic prefix (last cp_len samples copied in front)."""
    x = as_cvec(x_freq)
    if cp_len >= x.size:
        raise ConfigError(f"cp_len {cp_len} must be < N {x.size}")
    payload = idft(x)
    if cp_len == 0:
        return payload
    return np.concatenate([payload[-cp_len:], payload])


def ofdm_demodulate(y_cp, cp_len: int) -> np.ndarray:
    """Strip the cyclic prefix; no DFT (detection runs in the time domain)."""
    y = as_cvec(y_cp)
    if cp_len >= y.size:
        raise ConfigError(f"cp_len {cp_len} must be < signal length {y.size}")
    return y[cp_len:]


@lru_cache(maxsize=64)
def lambda_ramp(n: int, v: int, num_taps: int) -> np.ndarray:
    """Diagonal of the per-antenna frequency modulation, exp(j 2 pi (L+1) k v / N)."""
    k = np.arange(n)
    ramp = np.exp(2j * np.pi * (num_taps + 1) * k * v / n)
    ramp.setflags(write=False)
    return ramp


def lambda_transform(x_freq, v: int, num_taps: int) -> np.ndarray:
    """Apply the antenna-v phase ramp to the shared data vector."""
    x = as_cvec(x_freq)
    return lambda_ramp(x.size, v, num_taps) * x


# ---------------------------------------------------------------------------
# Received-signal synthesis
# ---------------------------------------------------------------------------

def synthesize_rx(
    x_freq,
    chan: ChannelRealization,
    phn: np.ndarray,
    sigma2_w: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-receive-antenna time-domain signals (post CP removal).

    phn has shape (num_tx, num_rx, N): the composite pair trajectories.
    The clean part is built via circular convolution of the per-antenna
    time-domain signal with the CIR; :func:`synthesize_rx_direct` provides
    the independent double-sum route for cross-checking.
    """
    x = as_cvec(x_freq, chan.num_subcarriers)
    n = x.size
    phn = np.asarray(phn, dtype=np.float64)
    if phn.shape != (chan.num_tx, chan.num_rx, n):
        raise DimensionError(
            f"phn shape {phn.shape} != {(chan.num_tx, chan.num_rx, n)}"
        )
    out = np.zeros((chan.num_rx, n), dtype=np.complex128)
    for v in range(chan.num_tx):
        x_time = idft(lambda_transform(x, v, chan.taps.shape[2]))
        for m in range(chan.num_rx):
            clean = circular_convolve(x_time, chan.taps[v, m])
            out[m] += np.exp(1j * phn[v, m]) * clean
    if sigma2_w > 0:
        if rng is None:
            raise ConfigError("rng required when sigma2_w > 0")
        out = add_awgn(out, sigma2_w, rng)
    return out


def synthesize_rx_direct(x_freq, chan: ChannelRealization, phn: np.ndarray) -> np.ndarray:
    """Noiseless synthesis by the direct double sum over antennas and subcarriers.

    y_m(n) = (1/sqrt(N)) sum_v e^{j theta_vm(n)} sum_k H_vm(k) d_v(k) e^{j2pi kn/N}.
    Deliberately written without the convolution shortcut; used as an oracle.
    """
    x = as_cvec(x_freq, chan.num_subcarriers)
    n = x.size
    kn = np.exp(2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n)  # [n, k]
    out = np.zeros((chan.num_rx, n), dtype=np.complex128)
    for v in range(chan.num_tx):
        d_v = lambda_transform(x, v, chan.taps.shape[2])
        for m in range(chan.num_rx):
            spectrum = chan.freq[v, m] * d_v
            clean = kn @ spectrum / np.sqrt(n)
            out[m] += np.exp(1j * phn[v, m]) * clean
    return out


def cpe_ici_decompose(j_coeffs, h_freq, x_freq, k: int) -> tuple[complex, complex]:
    """Split the k-th received subcarrier of one antenna pair into CPE and ICI.

    cpe = J(0) H(k) X(k); ici = sum_{t != k} J((k - t) mod N) H(t) X(t).
    Their sum equals the k-th entry of the circular convolution J (*) (H X).
    """
    j = as_cvec(j_coeffs)
    h = as_cvec(h_freq, j.size)
    x = as_cvec(x_freq, j.size)
    n = j.size
    cpe = j[0] * h[k] * x[k]
    idx = np.arange(n)
    ici = np.sum(j[(k - idx) % n] * h * x) - cpe
    return complex(cpe), complex(ici)


def received_spectrum_terms(
    x_hat, chan: ChannelRealization, theta_hat: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-antenna reconstruction terms used by the rate estimator.

    Returns (s_hat, s_int_hat), each (num_tx, num_rx, N):
    s_hat[v, m] = J_hat_vm (*) (H_vm d_v) is the own-antenna reconstruction,
    s_int_hat[v, m] the reconstruction of everything the other antennas leak
    into receive antenna m.  The spectral convolution with the phase
    coefficients is evaluated as DFT(e^{j theta} . IDFT(spectrum)), its
    time-domain equivalent.
    """
    x = as_cvec(x_hat, chan.num_subcarriers)
    nt, nr, n = theta_hat.shape
    ramps = np.stack([lambda_ramp(n, v, chan.taps.shape[2]) for v in range(nt)])
    spectrum = chan.freq * (ramps * x[None, :])[:, None, :]  # (nt, nr, n)
    time_clean = np.fft.ifft(spectrum, axis=2)
    per_pair = np.fft.fft(np.exp(1j * theta_hat) * time_clean, axis=2)
    totals = per_pair.sum(axis=0)  # (nr, n)
    s_int = totals[None, :, :] - per_pair
    return per_pair, s_int


# ---------------------------------------------------------------------------
# Frame layout (pilots + data)
# ---------------------------------------------------------------------------

# Comb pilot values: a fixed QPSK sequence, repeated across the comb.
_PILOT_SEQUENCE = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0)


@dataclass(frozen=True)
class PilotLayout:
    """Known comb pilots inside an OFDM symbol."""

    indices: tuple[int, ...]
    values: np.ndarray = field(default=None)

    def __post_init__(self):
        if len(self.indices) < 1:
            raise ConfigError("pilot layout needs at least one pilot")
        if self.values is None:
            vals = _PILOT_SEQUENCE[np.arange(len(self.indices)) % 4].copy()
            object.__setattr__(self, "values", vals)
        if len(self.values) != len(self.indices):
            raise ConfigError("pilot values/indices length mismatch")
        self.values.setflags(write=False)

    @classmethod
    def comb(cls, n_subcarriers: int, num_pilots: int = 4) -> "PilotLayout":
        """Evenly spaced comb, e.g. {0, 16, 32, 48} for N=64 with 4 pilots."""
        spacing = n_subcarriers // num_pilots
        return cls(indices=tuple(range(0, n_subcarriers, spacing)))

    def data_mask(self, n_subcarriers: int) -> np.ndarray:
        mask = np.ones(n_subcarriers, dtype=bool)
        mask[list(self.indices)] = False
        return mask


def build_frame(bits, cfg: OfdmConfig, pilots: PilotLayout | None) -> np.ndarray:
    """Assemble the frequency-domain vector X from data bits plus pilots."""
    x = np.empty(cfg.n_subcarriers, dtype=np.complex128)
    if pilots is None:
        x[:] = qam_map(bits, cfg.qam_order)
        return x
    mask = pilots.data_mask(cfg.n_subcarriers)
    expected = int(mask.sum()) * cfg.bits_per_symbol
    if np.asarray(bits).size != expected:
        raise ConfigError(f"expected {expected} data bits, got {np.asarray(bits).size}")
    x[mask] = qam_map(bits, cfg.qam_order)
    x[~mask] = pilots.values
    return x
