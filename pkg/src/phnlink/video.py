"""Rate-distortion video-quality model and light-field view ordering.

The distortion model maps the total source rate a detected link can sustain
onto a reconstruction MSE, D = b / (rate_total + z) + a, whose constants
depend on the video content and are fitted offline.  PSNR follows from the
MSE against 8-bit peak amplitude.  The view-ordering generator serializes a
(frames x H-views x V-views) light-field grid into the single serpentine
sequence a conventional encoder consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError

SINR_DENOMINATOR_FLOOR = 1e-12


@dataclass(frozen=True)
class RdParams:
    """Rate-distortion curve constants plus the timing that scales the rate.

    a: distortion floor (squared pixel units); b: rate-scale constant;
    z: rate offset; t_s: duration of one group of pictures (s); t0: duration
    of one OFDM symbol including prefix (s); r_c: channel code rate.
    The shipped defaults are a synthetic example set, not fitted to any
    real content.
    """

    a: float = 5.0
    b: float = 100.0
    z: float = 1.0
    t_s: float = 40e-6
    t0: float = 4e-6
    r_c: float = 0.5

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0 or self.z < 0:
            raise ConfigError("need a > 0, b > 0, z >= 0")
        if self.t_s <= 0 or self.t0 <= 0:
            raise ConfigError("durations must be positive")
        if not 0 < self.r_c <= 1:
            raise ConfigError("code rate must be in (0, 1]")

    @property
    def symbols_per_gop(self) -> float:
        return self.t_s / self.t0


def estimate_rate(k, v, x_hat, chan_freq, y_spec, s_hat, s_int_hat, r_c,
                  floor: float = SINR_DENOMINATOR_FLOOR) -> float:
    """Instantaneous source rate (bits/s/Hz) on subcarrier k for antenna v.

    chan_freq is (num_tx, num_rx, N); y_spec (num_rx, N); s_hat/s_int_hat
    (num_tx, num_rx, N) are the detector's own-antenna and interference
    reconstructions.  The residual power in the denominator is floored so a
    perfect reconstruction caps the rate instead of dividing by zero.
    """
    num = abs(x_hat[k]) ** 2 * float(np.sum(np.abs(chan_freq[v, :, k]) ** 2))
    resid = y_spec[:, k] - s_hat[v, :, k] - s_int_hat[v, :, k]
    den = max(float(np.sum(np.abs(resid) ** 2)), floor)
    return r_c * math.log2(1.0 + num / den)


def rate_table(detection, chan, r_c, floor: float = SINR_DENOMINATOR_FLOOR) -> np.ndarray:
    """All per-(antenna, subcarrier) rates for one detected symbol, vectorized."""
    num = (np.abs(detection.x_hat) ** 2)[None, :] * np.sum(np.abs(chan.freq) ** 2, axis=1)
    resid = detection.y_spectrum[None, :, :] - detection.s_hat - detection.s_int_hat
    den = np.maximum(np.sum(np.abs(resid) ** 2, axis=1), floor)
    return r_c * np.log2(1.0 + num / den)


def distortion(rates, params: RdParams) -> float:
    """Total distortion D = b / ((T_s/T0) * sum(rates) + z) + a."""
    total = float(np.sum(np.asarray(rates, dtype=np.float64)))
    if total < 0:
        raise ConfigError("rates must be >= 0")
    den = params.symbols_per_gop * total + params.z
    if den <= 0:
        raise ConfigError("distortion denominator must be positive")
    return params.b / den + params.a


def psnr(d_total: float) -> float:
    """PSNR in dB for 8-bit video: 10 log10(255^2 / D)."""
    if d_total <= 0:
        raise ConfigError(f"distortion must be positive, got {d_total}")
    return 10.0 * math.log10(255.0**2 / d_total)


def lf_transpose_order(h_views: int, v_views: int, num_frames: int,
                       scan: str = "serpentine") -> list[tuple[int, int, int]]:
    """Serialize a light-field video into (frame, h, v) scan order.

    Within a frame the view grid is walked row-major; ``serpentine`` reverses
    the column direction on alternate rows so consecutive views stay
    neighbors, ``raster`` always scans left-to-right.  The whole path then
    alternates direction frame to frame: odd frames replay the previous
    frame's path backwards, starting where it ended.
    """
    if h_views < 1 or v_views < 1 or num_frames < 1:
        raise ConfigError("view/frame counts must be >= 1")
    if scan not in ("serpentine", "raster"):
        raise ConfigError(f"unknown scan {scan!r}")
    path = []
    for h in range(h_views):
        cols = range(v_views)
        if scan == "serpentine" and h % 2 == 1:
            cols = reversed(cols)
        path.extend((h, v) for v in cols)
    order = []
    for f in range(num_frames):
        cells = path if f % 2 == 0 else list(reversed(path))
        order.extend((f, h, v) for h, v in cells)
    return order


def fit_rd_params(rates, mses) -> dict:
    """Least-squares fit of (a, b, z) to measured (rate, MSE) pairs.

    Returns the fitted constants plus the fit RMSE.  Needs at least three
    distinct rate points.
    """
    from scipy.optimize import curve_fit

    r = np.asarray(rates, dtype=np.float64)
    d = np.asarray(mses, dtype=np.float64)
    if r.size != d.size or r.size < 3:
        raise ConfigError("need at least 3 (rate, mse) pairs")

    def model(rate, a, b, z):
        return b / (rate + z) + a

    a0 = max(float(d.min()) * 0.5, 1e-6)
    b0 = max(float((d.max() - a0) * (r.min() + 1.0)), 1e-3)
    popt, _ = curve_fit(
        model, r, d, p0=(a0, b0, 1.0),
        bounds=([1e-12, 1e-12, 0.0], [np.inf, np.inf, np.inf]),
        maxfev=20000,
    )
    resid = model(r, *popt) - d
    return {
        "a": float(popt[0]),
        "b": float(popt[1]),
        "z": float(popt[2]),
        "rmse": float(np.sqrt(np.mean(resid**2))),
    }
