"""Joint data detection and multi-oscillator phase tracking.

The iterative receiver alternates two steps per transmit antenna: cancel the
other antennas' reconstructed contributions from the received vector, then
run a scalar extended Kalman filter over the time samples to re-estimate the
random-walk phase of that (tx, rx) oscillator pair.  After all pairs are
refreshed, the shared data vector is re-estimated by a regularized linear
solve against the rebuilt effective system matrix, and the loop stops once
the squared-residual objective moves by less than a threshold.

Baselines: a genie receiver using the true phase trajectories, a receiver
that assumes zero phase, and a pilot-aided common-phase corrector.  A brute
force constant-phase search is included as a reference for single-antenna
checks, and the complexity calculator counts complex operations for the
iterative receiver.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import ChannelRealization
from .exceptions import ConfigError, DimensionError, NumericalFailure
from .numerics import (
    cholesky_solve,
    gram_cholesky,
    gram_inverse_diagonal,
    gram_solve_with_diagonal,
    regularized_solve,
)
from .phy import lambda_ramp, qam_constellation, qam_slice, received_spectrum_terms

MIN_EQ_GAIN = 1e-6


@dataclass(frozen=True)
class EkfState:
    """Filter state per antenna pair: phase estimate and error variance.

    Used to carry tracking across OFDM symbols of a packet; both fields have
    shape (num_tx, num_rx).
    """

    theta_hat: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.m) < 0):
            raise ConfigError("EKF error variance must be >= 0")

    @classmethod
    def initial(cls, num_tx: int, num_rx: int, sigma2_delta: float) -> "EkfState":
        """Packet-start state: zero phase, prior variance equal to the innovation."""
        return cls(
            theta_hat=np.zeros((num_tx, num_rx)),
            m=np.full((num_tx, num_rx), float(sigma2_delta)),
        )


@dataclass(frozen=True)
class DetectorConfig:
    sigma2_w: float
    sigma2_delta: float
    zeta: float | None = None  # absolute threshold; None -> zeta_scale * ||y||^2
    zeta_scale: float = 1e-3
    max_iterations: int = 10
    literal_gain: bool = False  # use the as-printed gain denominator variant

    def __post_init__(self):
        if self.sigma2_w < 0 or self.sigma2_delta < 0:
            raise ConfigError("variances must be >= 0")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")


@dataclass(frozen=True)
class DetectionResult:
    """Everything downstream consumers need from one detected OFDM symbol."""

    detector: str
    x_hat: np.ndarray          # raw linear estimate, length N
    x_eq: np.ndarray           # bias-corrected symbols for slicing/demapping
    eq_noise_var: np.ndarray   # post-equalization noise variance per subcarrier
    theta_hat: np.ndarray      # (num_tx, num_rx, N) phase trajectories
    iterations: int
    residual_trace: tuple[float, ...]
    y_spectrum: np.ndarray     # (num_rx, N) received spectrum
    s_hat: np.ndarray          # (num_tx, num_rx, N) own-antenna reconstructions
    s_int_hat: np.ndarray      # (num_tx, num_rx, N) interference reconstructions
    final_state: EkfState | None = None


@lru_cache(maxsize=8)
def _idft_matrix(n: int) -> np.ndarray:
    idx = np.arange(n)
    return np.exp(2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def _pair_matrix(chan: ChannelRealization, theta_vm: np.ndarray, v: int, m: int) -> np.ndarray:
    """P_vm F^H H_vm Lambda_v for one antenna pair (N x N)."""
    n = chan.num_subcarriers
    col = chan.freq[v, m] * lambda_ramp(n, v, chan.taps.shape[2])
    return np.exp(1j * theta_vm)[:, None] * (_idft_matrix(n) * col[None, :])


def _psi_bases(chan: ChannelRealization) -> np.ndarray:
    """(nt, nr, N, N) per-pair system blocks before the phase rows are applied."""
    n = chan.num_subcarriers
    nt = chan.num_tx
    ramps = np.stack([lambda_ramp(n, v, chan.taps.shape[2]) for v in range(nt)])
    return _idft_matrix(n)[None, None, :, :] * (chan.freq * ramps[:, None, :])[:, :, None, :]


def _psi_from_bases(bases: np.ndarray, theta_hat: np.ndarray) -> np.ndarray:
    """Apply phase rows to precomputed blocks and stack over receive antennas."""
    nt, nr, n, _ = bases.shape
    psi = np.einsum("vmnk,vmn->mnk", bases, np.exp(1j * theta_hat))
    return psi.reshape(nr * n, n)


def build_psi(chan: ChannelRealization, theta_hat: np.ndarray) -> np.ndarray:
    """Stacked effective system matrix mapping X to all received samples.

    Per receive antenna the per-pair matrices are summed (the antennas share
    one data vector); the per-antenna blocks are then stacked row-wise into an
    (N * num_rx) x N system.
    """
    nt, nr, n = chan.num_tx, chan.num_rx, chan.num_subcarriers
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    if theta_hat.shape != (nt, nr, n):
        raise DimensionError(f"theta_hat shape {theta_hat.shape} != {(nt, nr, n)}")
    return _psi_from_bases(_psi_bases(chan), theta_hat)


def mmse_detect(y_stacked, psi_stacked, sigma2_w: float) -> np.ndarray:
    """X_hat = (Psi^H Psi + sigma2_w I)^-1 Psi^H y."""
    return regularized_solve(psi_stacked, y_stacked, sigma2_w)


def _mmse_with_equalizer_stats(y_stacked, psi_stacked, sigma2_w):
    """MMSE solve plus the per-subcarrier bias factor and residual noise variance.

    With unit-energy symbols the estimate is biased by g = 1 - sigma2 * q
    (q the Gram-inverse diagonal); x/g is approximately unbiased with noise
    variance (1 - g)/g.
    """
    if sigma2_w == 0:
        x = regularized_solve(psi_stacked, y_stacked, 0.0)
        n = x.size
        return x, np.ones(n), np.full(n, 1e-12)
    x, q = gram_solve_with_diagonal(psi_stacked, y_stacked, sigma2_w)
    g = np.clip(1.0 - sigma2_w * q, MIN_EQ_GAIN, 1.0)
    nv = np.maximum((1.0 - g) / g, 1e-12)
    return x, g, nv


def reconstruct_pair_time(
    chan: ChannelRealization, theta_vm: np.ndarray, x_hat: np.ndarray, v: int, m: int
) -> np.ndarray:
    """Time-domain contribution of antenna v at receive antenna m."""
    n = chan.num_subcarriers
    d_v = lambda_ramp(n, v, chan.taps.shape[2]) * x_hat
    clean = np.fft.ifft(chan.freq[v, m] * d_v, norm="ortho")
    return np.exp(1j * theta_vm) * clean


def cancel_interference(
    y_m: np.ndarray,
    chan: ChannelRealization,
    theta_hat: np.ndarray,
    x_hat: np.ndarray,
    v: int,
    m: int,
) -> np.ndarray:
    """Remove the reconstructed signals of every transmit antenna except v."""
    out = np.array(y_m, dtype=np.complex128)
    for ell in range(chan.num_tx):
        if ell == v:
            continue
        out -= reconstruct_pair_time(chan, theta_hat[ell, m], x_hat, ell, m)
    return out


def ekf_track(
    y_obs,
    s_clean,
    sigma2_delta: float,
    sigma2_obs: float,
    theta0: float = 0.0,
    m0: float | None = None,
    literal_gain: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Track the pair phase over one symbol given the clean waveform.

    Per sample: predict theta(n|n-1) = theta(n-1|n-1) and
    M(n|n-1) = M(n-1|n-1) + sigma2_delta; linearize the observation around the
    prediction (Jacobian j e^{j theta} s(n)); gain from the predicted
    covariance; update with the real part of the gain-weighted innovation.
    ``literal_gain`` switches the gain denominator to the previous posterior
    covariance (the as-printed variant) for comparison.

    Returns the posterior phase and covariance trajectories.  If s is zero
    everywhere the gain vanishes and the estimate stays frozen at theta0.
    """
    y_list = np.asarray(y_obs, dtype=np.complex128).tolist()
    s_list = np.asarray(s_clean, dtype=np.complex128).tolist()
    if len(y_list) != len(s_list):
        raise DimensionError("observation/waveform length mismatch")
    n = len(y_list)
    q = float(sigma2_delta)
    r = float(sigma2_obs)
    t_post = float(theta0)
    m_post = q if m0 is None else float(m0)
    prev_post = m_post  # stands in for the (nonexistent) posterior before n=0
    theta_out = [0.0] * n
    m_out = [0.0] * n
    for i in range(n):
        if i == 0:
            # (theta0, m0) already are the predicted moments for the first sample.
            t_pr, m_pr = t_post, m_post
        else:
            t_pr, m_pr = t_post, m_post + q
        e = cmath.exp(1j * t_pr)
        g = 1j * e * s_list[i]
        g2 = g.real * g.real + g.imag * g.imag
        denom = (prev_post if literal_gain else m_pr) * g2 + r
        k = m_pr * g.conjugate() / denom if denom > 0.0 else 0.0
        innov = y_list[i] - e * s_list[i]
        t_post = t_pr + (k * innov).real
        m_post = max(m_pr - (k * g).real * m_pr, 0.0)
        prev_post = m_post
        theta_out[i] = t_post
        m_out[i] = m_post
    return np.asarray(theta_out), np.asarray(m_out)


def _residual(y_stacked: np.ndarray, psi: np.ndarray, x_hat: np.ndarray) -> float:
    r = y_stacked - psi @ x_hat
    return float(np.real(np.vdot(r, r)))


def _finalize(detector, chan, y, x_hat, x_eq, eq_nv, theta_hat, iterations, trace, state):
    y_spec = np.fft.fft(np.asarray(y), axis=1, norm="ortho")
    s_hat, s_int = received_spectrum_terms(x_hat, chan, theta_hat)
    return DetectionResult(
        detector=detector,
        x_hat=x_hat,
        x_eq=x_eq,
        eq_noise_var=eq_nv,
        theta_hat=theta_hat,
        iterations=iterations,
        residual_trace=tuple(trace),
        y_spectrum=y_spec,
        s_hat=s_hat,
        s_int_hat=s_int,
        final_state=state,
    )


def iterative_detect(
    y: np.ndarray,
    chan: ChannelRealization,
    cfg: DetectorConfig,
    init_state: EkfState | None = None,
) -> DetectionResult:
    """Run the full iterative joint detector on one OFDM symbol.

    y has shape (num_rx, N), time domain after CP removal.  ``init_state``
    carries the phase trackers over from the previous symbol of a packet;
    when omitted the packet-start initialization (zero phase, variance equal
    to the innovation) is used.
    """
    nt, nr, n = chan.num_tx, chan.num_rx, chan.num_subcarriers
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (nr, n):
        raise DimensionError(f"y shape {y.shape} != {(nr, n)}")
    y_st = y.reshape(-1)
    state = init_state or EkfState.initial(nt, nr, cfg.sigma2_delta)

    zeta = cfg.zeta if cfg.zeta is not None else cfg.zeta_scale * float(
        np.real(np.vdot(y_st, y_st))
    )

    # Data initialization: plain least squares against the carried-over (or
    # zero) phase estimates.
    theta = np.broadcast_to(state.theta_hat[:, :, None], (nt, nr, n)).copy()
    psi = build_psi(chan, theta)
    x_hat = regularized_solve(psi, y_st, 0.0)
    res_prev = _residual(y_st, psi, x_hat)

    ramps = np.stack([lambda_ramp(n, v, chan.taps.shape[2]) for v in range(nt)])
    # System-matrix blocks without the phase rows; fixed for the whole run.
    bases = _psi_bases(chan)
    m_final = np.zeros((nt, nr))
    trace: list[float] = []
    iterations = 0
    factor = None
    for _ in range(cfg.max_iterations):
        iterations += 1
        # Clean per-pair waveforms for the current data estimate, and their
        # phase-rotated reconstructions used for interference cancellation.
        spectrum = chan.freq * (ramps * x_hat[None, :])[:, None, :]
        s_clean = np.fft.ifft(spectrum, axis=2, norm="ortho")
        recon = np.exp(1j * theta) * s_clean
        totals = recon.sum(axis=0)  # (nr, n)
        for v in range(nt):
            for m in range(nr):
                y_hat_v = y[m] - totals[m] + recon[v, m]
                th, mm = ekf_track(
                    y_hat_v,
                    s_clean[v, m],
                    cfg.sigma2_delta,
                    cfg.sigma2_w,
                    theta0=float(state.theta_hat[v, m]),
                    m0=float(state.m[v, m]),
                    literal_gain=cfg.literal_gain,
                )
                theta[v, m] = th
                m_final[v, m] = mm[-1]
                # Later pairs cancel against the freshest estimates.
                updated = np.exp(1j * th) * s_clean[v, m]
                totals[m] += updated - recon[v, m]
                recon[v, m] = updated
        psi = _psi_from_bases(bases, theta)
        factor = gram_cholesky(psi, cfg.sigma2_w, check_singular=(cfg.sigma2_w == 0))
        x_hat = cholesky_solve(factor, psi.conj().T @ y_st)
        res = _residual(y_st, psi, x_hat)
        if not np.isfinite(res):
            raise NumericalFailure(f"non-finite residual at iteration {iterations}")
        trace.append(res)
        if abs(res - res_prev) <= zeta:
            break
        res_prev = res

    if cfg.sigma2_w > 0:
        q = gram_inverse_diagonal(factor)
        g = np.clip(1.0 - cfg.sigma2_w * q, MIN_EQ_GAIN, 1.0)
        x_eq, eq_nv = x_hat / g, np.maximum((1.0 - g) / g, 1e-12)
    else:
        x_eq, eq_nv = x_hat, np.full(n, 1e-12)

    final = EkfState(theta_hat=theta[:, :, -1].copy(), m=m_final)
    return _finalize("proposed", chan, y, x_hat, x_eq, eq_nv, theta, iterations, trace, final)


def advance_state(state: EkfState, sigma2_delta: float, gap_samples: int) -> EkfState:
    """Propagate the pair trackers across the inter-symbol gap (cyclic prefix).

    The phase keeps random-walking while the prefix samples are discarded, so
    the prior variance grows by gap_samples * sigma2_delta before the next
    symbol's first observation.
    """
    return EkfState(theta_hat=state.theta_hat.copy(), m=state.m + gap_samples * sigma2_delta)


def detect_perfect_phn(
    y: np.ndarray, chan: ChannelRealization, true_phn: np.ndarray, sigma2_w: float
) -> DetectionResult:
    """Genie bound: build the system matrix from the true trajectories, solve once."""
    theta = np.asarray(true_phn, dtype=np.float64).copy()
    y = np.asarray(y, dtype=np.complex128)
    psi = build_psi(chan, theta)
    y_st = y.reshape(-1)
    x_hat, g, eq_nv = _mmse_with_equalizer_stats(y_st, psi, sigma2_w)
    trace = [_residual(y_st, psi, x_hat)]
    return _finalize("perfect", chan, y, x_hat, x_hat / g, eq_nv, theta, 1, trace, None)


def detect_no_tracking(
    y: np.ndarray, chan: ChannelRealization, sigma2_w: float
) -> DetectionResult:
    """Reference receiver with no phase tracking during data symbols."""
    nt, nr, n = chan.num_tx, chan.num_rx, chan.num_subcarriers
    theta = np.zeros((nt, nr, n))
    y = np.asarray(y, dtype=np.complex128)
    psi = build_psi(chan, theta)
    y_st = y.reshape(-1)
    x_hat, g, eq_nv = _mmse_with_equalizer_stats(y_st, psi, sigma2_w)
    trace = [_residual(y_st, psi, x_hat)]
    return _finalize("no_tracking", chan, y, x_hat, x_hat / g, eq_nv, theta, 1, trace, None)


def detect_pilot_cpe(
    y: np.ndarray,
    chan: ChannelRealization,
    pilot_layout,
    sigma2_w: float,
    qam_order: int,
    sigma2_delta: float = 0.0,
    refine: bool = False,
    shrink: bool = True,
    phase_prior_var: float | None = None,
) -> DetectionResult:
    """Pilot-aided common-phase-error correction baseline.

    A first pass with no tracking supplies tentative data decisions; the
    common rotation of every antenna pair is then least-squares fitted, per
    receive antenna, from the known comb pilots (and, when ``refine`` is on,
    from the decision-directed full symbol).  ``shrink`` scales the fitted
    angle toward zero by the ratio of the rotation's prior variance to the
    fit's own error variance, so a noisy fit degrades gracefully to the
    no-tracking receiver instead of injecting estimation noise.
    ``phase_prior_var`` overrides the single-symbol random-walk prior, e.g.
    for a symbol deep inside a packet where drift has accumulated.
    """
    nt, nr, n = chan.num_tx, chan.num_rx, chan.num_subcarriers
    if pilot_layout is None or len(pilot_layout.indices) < 1:
        raise ConfigError("pilot detector needs at least one pilot")
    y = np.asarray(y, dtype=np.complex128)
    y_st = y.reshape(-1)
    y_spec = np.fft.fft(y, axis=1, norm="ortho")
    ramps = np.stack([lambda_ramp(n, v, chan.taps.shape[2]) for v in range(nt)])

    pilot_idx = np.asarray(pilot_layout.indices)
    data_mask = pilot_layout.data_mask(n)

    initial = detect_no_tracking(y, chan, sigma2_w)

    def ls_cpe(bins: np.ndarray, x_ref: np.ndarray):
        """Per-rx LS fit of the per-pair constant rotations over given bins."""
        c = np.empty((nt, nr), dtype=np.complex128)
        var_phase = np.empty((nt, nr))
        for m in range(nr):
            a = (chan.freq[:, m, bins] * ramps[:, bins] * x_ref[None, bins]).T  # (B, nt)
            b = y_spec[m, bins]
            sol, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
            resid = b - a @ sol
            dof = max(len(bins) - nt, 1)
            sigma2_fit = float(np.real(np.vdot(resid, resid))) / dof
            gram_inv = np.linalg.pinv(a.conj().T @ a)
            mag2 = np.maximum(np.abs(sol) ** 2, 1e-2)
            var_phase[:, m] = sigma2_fit * np.real(np.diag(gram_inv)) / (2.0 * mag2)
            c[:, m] = sol
        return c, var_phase

    x_pilot_ref = np.zeros(n, dtype=np.complex128)
    x_pilot_ref[pilot_idx] = pilot_layout.values
    c_hat, var_phase = ls_cpe(pilot_idx, x_pilot_ref)

    if refine:
        phi1 = np.angle(c_hat)
        theta1 = np.broadcast_to(phi1[:, :, None], (nt, nr, n)).copy()
        psi1 = build_psi(chan, theta1)
        x1, g1, _ = _mmse_with_equalizer_stats(y_st, psi1, sigma2_w)
        x_ref = np.array(x_pilot_ref)
        x_ref[data_mask] = qam_slice(x1[data_mask] / g1[data_mask], qam_order)
        c_hat, var_phase = ls_cpe(np.arange(n), x_ref)

    phi = np.angle(c_hat)
    if shrink:
        if phase_prior_var is None:
            # Prior variance of the symbol-mean phase of a random walk from zero.
            phase_prior_var = sigma2_delta * (n - 1) * (2 * n - 1) / (6.0 * n)
        rho = (
            phase_prior_var / (phase_prior_var + var_phase)
            if phase_prior_var > 0
            else np.zeros_like(var_phase)
        )
        phi = phi * rho

    theta = np.broadcast_to(phi[:, :, None], (nt, nr, n)).copy()
    psi = build_psi(chan, theta)
    x_hat, g, eq_nv = _mmse_with_equalizer_stats(y_st, psi, sigma2_w)
    trace = [*initial.residual_trace, _residual(y_st, psi, x_hat)]
    return _finalize("pilot", chan, y, x_hat, x_hat / g, eq_nv, theta, len(trace), trace, None)


def exhaustive_constant_phase_oracle(
    y: np.ndarray,
    chan: ChannelRealization,
    qam_order: int,
    grid: np.ndarray,
) -> tuple[float, float, np.ndarray]:
    """Brute-force reference for single-antenna instances.

    Scans a grid of constant pair phases; for each candidate the objective
    separates per subcarrier, so the best constellation point is chosen
    exactly.  Returns (best_phase, best_objective, best_sliced_data).
    Only num_tx == num_rx == 1 is supported (the search space explodes
    otherwise; that is the point of the iterative receiver).
    """
    if chan.num_tx != 1 or chan.num_rx != 1:
        raise ConfigError("oracle supports single-antenna instances only")
    n = chan.num_subcarriers
    y_spec = np.fft.fft(np.asarray(y, dtype=np.complex128), axis=1, norm="ortho")[0]
    h_eff = chan.freq[0, 0] * lambda_ramp(n, 0, chan.taps.shape[2])
    points = qam_constellation(qam_order)
    best = (None, np.inf, None)
    for theta in np.asarray(grid, dtype=np.float64):
        cand = np.exp(1j * theta) * h_eff[:, None] * points[None, :]  # (N, order)
        err = np.abs(y_spec[:, None] - cand) ** 2
        pick = err.argmin(axis=1)
        obj = float(err[np.arange(n), pick].sum())
        if obj < best[1]:
            best = (float(theta), obj, points[pick])
    return best


def sliced_objective(
    y: np.ndarray, chan: ChannelRealization, theta_hat: np.ndarray, x_sliced: np.ndarray
) -> float:
    """Squared residual of a candidate (phase trajectories, sliced data) pair."""
    psi = build_psi(chan, np.asarray(theta_hat, dtype=np.float64))
    return _residual(np.asarray(y, dtype=np.complex128).reshape(-1), psi, x_sliced)


# ---------------------------------------------------------------------------
# Complexity model
# ---------------------------------------------------------------------------

def complexity_counts(n: int, nt: int, nr: int, t: int) -> tuple[int, int]:
    """Exact complex multiplication/addition counts of the iterative receiver.

    ``t`` is the number of outer iterations; t = 0 leaves only the data
    initialization term.
    """
    if n < 1 or nt < 1 or nr < 1:
        raise ConfigError("n, nt, nr must be >= 1")
    if t < 0:
        raise ConfigError("t must be >= 0")
    n, nt, nr, t = int(n), int(nt), int(nr), int(t)

    init_m = n * n * nt * (n * nt * (nt + 2) + 1)
    per_iter_m = (
        10 * n
        + n * n * (n + 1)
        + n * n * nt * (n * nt * (nt + 2) + 1)
        + 2 * n**3
    )
    cancel_m = (nt - 1) * (n * n * (3 * n + 1))
    mults = nr * (nt * (cancel_m + per_iter_m * t) + init_m)

    init_a = n * nt * (n - 1) * (n * nt + 1) + n * n * nt * (n * nt * nt + n * nt - 1)
    per_iter_a = (
        5 * n
        + n * (n - 1) * (n + 1)
        + n * nt * (n - 1) * (n * nt + 1)
        + n * n * nt * (n * nt * nt + n * nt - 1)
        + 2 * n * n * (n - 1)
    )
    cancel_a = (nt - 1) * (n * (n - 1) * (2 * n + 1))
    adds = nr * (nt * (cancel_a + per_iter_a * t) + init_a)
    return mults, adds
