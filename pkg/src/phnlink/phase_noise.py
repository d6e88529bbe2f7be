"""Wiener oscillator phase noise: trajectories, pairing, and spectra.

Each transmit and receive antenna carries an independent oscillator; the
phase a given (tx, rx) antenna pair sees is the sum of the two oscillator
trajectories.  The spectral coefficients of exp(j theta) use the 1/N scaling
(distinct from the unitary 1/sqrt(N) signal transforms in
:mod:`phnlink.numerics`), under which sum_k |J(k)|^2 == 1 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DimensionError

# How a configured innovation variance maps onto the two oscillators of a pair:
# "per_pair" splits it evenly so the composite matches the configured value;
# "per_oscillator" gives each oscillator the full value (composite is doubled).
VARIANCE_CONVENTIONS = ("per_pair", "per_oscillator")


@dataclass(frozen=True)
class PhnTrajectory:
    """A length-N phase sample path (radians) with its innovation variance."""

    theta: np.ndarray
    sigma2_delta: float

    def __post_init__(self):
        t = np.asarray(self.theta, dtype=np.float64)
        if t.ndim != 1 or t.size == 0:
            raise DimensionError("trajectory must be a non-empty 1-D vector")
        if not np.all(np.isfinite(t)):
            raise DimensionError("trajectory contains NaN/Inf")
        object.__setattr__(self, "theta", t)
        t.setflags(write=False)

    def __len__(self) -> int:
        return self.theta.size


def draw_wiener(
    rng: np.random.Generator, n: int, sigma2_delta: float, theta0: float = 0.0
) -> PhnTrajectory:
    """Random walk theta(i) = theta(i-1) + delta(i), delta ~ N(0, sigma2_delta)."""
    if sigma2_delta < 0:
        raise ConfigError(f"innovation variance must be >= 0, got {sigma2_delta}")
    if n < 1:
        raise ConfigError("trajectory length must be >= 1")
    increments = np.sqrt(sigma2_delta) * rng.standard_normal(n - 1) if n > 1 else np.empty(0)
    theta = theta0 + np.concatenate([[0.0], np.cumsum(increments)])
    return PhnTrajectory(theta=theta, sigma2_delta=sigma2_delta)


def pair_phn(theta_v: PhnTrajectory, theta_m: PhnTrajectory) -> PhnTrajectory:
    """Composite pair process theta_v(n) + theta_m(n); variances add."""
    if len(theta_v) != len(theta_m):
        raise DimensionError(f"length mismatch: {len(theta_v)} vs {len(theta_m)}")
    return PhnTrajectory(
        theta=theta_v.theta + theta_m.theta,
        sigma2_delta=theta_v.sigma2_delta + theta_m.sigma2_delta,
    )


def rereference(traj: PhnTrajectory) -> tuple[PhnTrajectory, float]:
    """Split a trajectory into (theta - theta(0), theta(0)).

    The returned offset phi0 is the part of the phase that is indistinguishable
    from the channel phase of the first sample; multiplying the channel
    response by exp(j phi0) and using the re-referenced trajectory reproduces
    the original signal model exactly.
    """
    phi0 = float(traj.theta[0])
    return PhnTrajectory(theta=traj.theta - phi0, sigma2_delta=traj.sigma2_delta), phi0


def spectral_coeffs(theta) -> np.ndarray:
    """Spectral coefficients J(k) = (1/N) sum_n exp(j theta(n)) exp(-j 2 pi k n / N)."""
    t = theta.theta if isinstance(theta, PhnTrajectory) else np.asarray(theta, dtype=np.float64)
    if t.ndim != 1 or t.size == 0:
        raise DimensionError("trajectory must be a non-empty 1-D vector")
    return np.fft.fft(np.exp(1j * t)) / t.size


def draw_pair_set(
    rng: np.random.Generator,
    num_tx: int,
    num_rx: int,
    n: int,
    sigma2_delta: float,
    convention: str = "per_pair",
) -> np.ndarray:
    """Draw composite trajectories for every (v, m) pair from independent oscillators.

    Returns an array of shape (num_tx, num_rx, n).  All oscillators start at
    phase 0 (packet-start alignment from training).  The composite innovation
    variance per pair equals ``sigma2_delta`` under the default "per_pair"
    convention and 2 * sigma2_delta under "per_oscillator".
    """
    if convention not in VARIANCE_CONVENTIONS:
        raise ConfigError(f"unknown variance convention {convention!r}")
    per_osc = sigma2_delta / 2.0 if convention == "per_pair" else sigma2_delta
    tx = np.stack([draw_wiener(rng, n, per_osc).theta for _ in range(num_tx)])
    rx = np.stack([draw_wiener(rng, n, per_osc).theta for _ in range(num_rx)])
    return tx[:, None, :] + rx[None, :, :]
