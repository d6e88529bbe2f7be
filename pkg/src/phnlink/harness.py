"""Monte Carlo campaign runner: seeding, trial engine, aggregation, export.

Every trial draws one quasi-static channel, phase trajectories for all
oscillator pairs, data bits and noise, synthesizes the received frames and
runs every requested detector on the same realization (paired comparison).
Trial seeds derive from (campaign seed, grid point, trial index), so results
are byte-identical regardless of how many workers execute the grid.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .channel import draw_mimo_channel, noise_variance_for_snr
from .config import CampaignConfig, config_hash
from .detector import (
    DetectorConfig,
    EkfState,
    advance_state,
    complexity_counts,
    detect_no_tracking,
    detect_perfect_phn,
    detect_pilot_cpe,
    iterative_detect,
)
from .exceptions import CampaignError, NumericalFailure, SingularMatrixError
from .ldpc import LdpcCode
from .phase_noise import draw_pair_set
from .phy import PilotLayout, build_frame, qam_hard_demap, qam_llr, synthesize_rx
from .video import distortion, psnr, rate_table

MAX_FAILURE_FRACTION = 0.01

CSV_COLUMNS = (
    "snr_db", "sigma2_delta", "nt", "nr", "qam", "detector", "trials",
    "uncoded_ber", "ber_ci", "coded_ber", "psnr_db", "mean_iters",
    "c_mult", "c_add", "failures",
)


@dataclass(frozen=True)
class ResultRecord:
    snr_db: float
    sigma2_delta: float
    nt: int
    nr: int
    qam: int
    detector: str
    trials: int
    uncoded_ber: float
    ber_ci: float
    coded_ber: float | None
    psnr_db: float
    mean_iters: float
    c_mult: float
    c_add: float
    failures: int


# Per-trial, per-detector accumulator tuple layout:
# (bit_errors, bits, coded_errors, coded_bits, gop_rate, iters, symbols, failed)
_FAILED = (0, 0, 0, 0, 0.0, 0, 0, 1)


def trial_seed(cfg_seed: int, snr_db: float, sigma2_delta: float, trial: int):
    """Deterministic, platform-independent seed for one trial of one grid point."""
    snr_bits = int(np.float64(snr_db).view(np.uint64))
    s2d_bits = int(np.float64(sigma2_delta).view(np.uint64))
    return np.random.SeedSequence([cfg_seed & 0xFFFFFFFFFFFFFFFF, snr_bits, s2d_bits, trial])


def _coded_symbols_needed(cfg: CampaignConfig, data_bits_per_symbol: int) -> int:
    return math.ceil(1296 / data_bits_per_symbol)


_CODE_CACHE: dict[int, LdpcCode] = {}


def _default_code() -> LdpcCode:
    if 0 not in _CODE_CACHE:
        _CODE_CACHE[0] = LdpcCode.default()
    return _CODE_CACHE[0]


def run_trial(cfg: CampaignConfig, snr_db: float, sigma2_delta: float, trial: int) -> dict:
    """Simulate and detect one trial; returns per-detector accumulator tuples."""
    rng = np.random.default_rng(trial_seed(cfg.seed, snr_db, sigma2_delta, trial))
    n = cfg.ofdm.n_subcarriers
    cp = cfg.ofdm.cp_len
    bps = cfg.ofdm.bits_per_symbol
    pilots = PilotLayout.comb(n, cfg.num_pilots) if cfg.num_pilots > 0 else None
    data_mask = pilots.data_mask(n) if pilots is not None else np.ones(n, dtype=bool)
    data_bits_per_symbol = int(data_mask.sum()) * bps

    code = _default_code() if cfg.coding else None
    if cfg.coding:
        symbols = _coded_symbols_needed(cfg, data_bits_per_symbol)
        msg = rng.integers(0, 2, code.k).astype(np.uint8)
        coded_bits = code.encode(msg)
        filler = rng.integers(0, 2, symbols * data_bits_per_symbol - code.n)
        tx_bits = np.concatenate([coded_bits, filler.astype(np.uint8)])
    else:
        symbols = cfg.gop_symbols
        tx_bits = rng.integers(0, 2, symbols * data_bits_per_symbol).astype(np.uint8)
        msg = coded_bits = None

    sigma2_w = noise_variance_for_snr(snr_db, cfg.num_tx, cfg.pdp)
    chan = draw_mimo_channel(rng, cfg.num_tx, cfg.num_rx, cfg.pdp, n)
    total_samples = symbols * (n + cp)
    phn_full = draw_pair_set(
        rng, cfg.num_tx, cfg.num_rx, total_samples, sigma2_delta, cfg.phn_convention
    )

    frames = []  # (x_true, y_rx, phn_window, bits) per symbol
    for s in range(symbols):
        bits_s = tx_bits[s * data_bits_per_symbol:(s + 1) * data_bits_per_symbol]
        x = build_frame(bits_s, cfg.ofdm, pilots)
        start = s * (n + cp) + cp
        window = phn_full[:, :, start:start + n]
        y = synthesize_rx(x, chan, window, sigma2_w, rng)
        frames.append((x, y, window, bits_s))

    det_cfg = DetectorConfig(
        sigma2_w=sigma2_w,
        sigma2_delta=sigma2_delta,
        zeta_scale=cfg.zeta_scale,
        max_iterations=cfg.max_iterations,
    )
    out = {}
    for det in cfg.detectors:
        try:
            out[det] = _run_detector_chain(
                det, cfg, frames, chan, det_cfg, pilots, data_mask, code, msg, coded_bits
            )
        except (NumericalFailure, SingularMatrixError):
            out[det] = _FAILED
    return out


def _run_detector_chain(det, cfg, frames, chan, det_cfg, pilots, data_mask, code, msg, coded_bits):
    n = cfg.ofdm.n_subcarriers
    cp = cfg.ofdm.cp_len
    bit_errors = 0
    bits_total = 0
    rate_sum = 0.0
    iters = 0
    llrs = [] if cfg.coding else None
    state = EkfState.initial(cfg.num_tx, cfg.num_rx, det_cfg.sigma2_delta)
    for s, (x_true, y, window, bits_s) in enumerate(frames):
        if det == "proposed":
            result = iterative_detect(y, chan, det_cfg, init_state=state)
            state = advance_state(result.final_state, det_cfg.sigma2_delta, cp + 1)
        elif det == "perfect":
            result = detect_perfect_phn(y, chan, window, det_cfg.sigma2_w)
        elif det == "no_tracking":
            result = detect_no_tracking(y, chan, det_cfg.sigma2_w)
        elif det == "pilot":
            # Rotation prior: drift accumulated up to the symbol start plus
            # the within-symbol mean of the walk.
            prior = det_cfg.sigma2_delta * (
                s * (n + cp) + cp + (n - 1) * (2 * n - 1) / (6.0 * n)
            )
            result = detect_pilot_cpe(
                y, chan, pilots, det_cfg.sigma2_w,
                qam_order=cfg.ofdm.qam_order, sigma2_delta=det_cfg.sigma2_delta,
                phase_prior_var=prior,
            )
        else:
            raise CampaignError(f"unknown detector {det}")
        hard = qam_hard_demap(result.x_eq[data_mask], cfg.ofdm.qam_order)
        bit_errors += int(np.sum(hard != bits_s))
        bits_total += bits_s.size
        rate_sum += float(rate_table(result, chan, cfg.rd.r_c)[:, data_mask].sum())
        iters += result.iterations
        if cfg.coding:
            llrs.append(qam_llr(result.x_eq[data_mask], cfg.ofdm.qam_order,
                                result.eq_noise_var[data_mask]))

    coded_errors = coded_bits_total = 0
    if cfg.coding:
        llr_vec = np.concatenate(llrs)[: code.n]
        decoded, _converged, _it = code.decode(llr_vec)
        coded_errors = int(np.sum(decoded[: code.k] != msg))
        coded_bits_total = code.k
    # Scale the per-trial rate total to one full group of pictures.
    symbols = len(frames)
    gop_rate = rate_sum * (cfg.rd.symbols_per_gop / symbols)
    return (bit_errors, bits_total, coded_errors, coded_bits_total, gop_rate, iters, symbols, 0)


def _run_chunk(cfg: CampaignConfig, snr_db: float, sigma2_delta: float, trials):
    return [(t, run_trial(cfg, snr_db, sigma2_delta, t)) for t in trials]


def run_campaign(cfg: CampaignConfig, workers: int | None = None, log=None) -> list[ResultRecord]:
    """Execute the full (snr, sigma2_delta) grid and aggregate per detector.

    ``workers`` overrides cfg.workers; <= 1 means in-process serial execution.
    Aggregation always happens in trial-index order so float accumulations do
    not depend on the execution schedule.
    """
    workers = cfg.workers if workers is None else workers
    points = [(snr, s2d) for snr in cfg.snr_db for s2d in cfg.sigma2_delta]
    per_point: dict[tuple, list] = {p: [] for p in points}

    t_start = time.time()
    if workers <= 1:
        for point in points:
            per_point[point] = _run_chunk(cfg, point[0], point[1], range(cfg.trials))
            if log:
                log(f"point snr={point[0]} s2d={point[1]:g} done "
                    f"({time.time() - t_start:.1f}s)")
    else:
        chunk = max(1, cfg.trials // (workers * 4))
        jobs = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for point in points:
                for lo in range(0, cfg.trials, chunk):
                    trials = range(lo, min(lo + chunk, cfg.trials))
                    jobs.append((point, pool.submit(_run_chunk, cfg, point[0], point[1], trials)))
            for point, fut in jobs:
                per_point[point].extend(fut.result())
        if log:
            log(f"grid done ({time.time() - t_start:.1f}s)")

    records = []
    for (snr, s2d) in points:
        outcomes = sorted(per_point[(snr, s2d)], key=lambda item: item[0])
        for det in cfg.detectors:
            records.append(_aggregate(cfg, snr, s2d, det, [o[1][det] for o in outcomes]))
    return records


def _aggregate(cfg, snr_db, sigma2_delta, det, stats) -> ResultRecord:
    failures = sum(s[7] for s in stats)
    ok = [s for s in stats if not s[7]]
    if failures > MAX_FAILURE_FRACTION * len(stats):
        raise CampaignError(
            f"{failures}/{len(stats)} trials failed for detector {det} at "
            f"snr={snr_db}, sigma2_delta={sigma2_delta}"
        )
    bits = sum(s[1] for s in ok)
    errors = sum(s[0] for s in ok)
    ber = errors / bits if bits else 0.0
    ci = 1.96 * math.sqrt(ber * (1.0 - ber) / bits) if bits else 0.0
    coded_bits = sum(s[3] for s in ok)
    coded_ber = (sum(s[2] for s in ok) / coded_bits) if coded_bits else None
    psnr_vals = [psnr(distortion(s[4], cfg.rd)) for s in ok]
    mean_psnr = sum(psnr_vals) / len(psnr_vals) if psnr_vals else 0.0
    symbols = sum(s[6] for s in ok)
    mean_iters = (sum(s[5] for s in ok) / symbols) if symbols else 0.0
    c_mult, c_add = _complexity_at(cfg, mean_iters)
    return ResultRecord(
        snr_db=float(snr_db),
        sigma2_delta=float(sigma2_delta),
        nt=cfg.num_tx,
        nr=cfg.num_rx,
        qam=cfg.ofdm.qam_order,
        detector=det,
        trials=len(ok),
        uncoded_ber=ber,
        ber_ci=ci,
        coded_ber=coded_ber,
        psnr_db=mean_psnr,
        mean_iters=mean_iters,
        c_mult=c_mult,
        c_add=c_add,
        failures=failures,
    )


def _complexity_at(cfg, mean_t: float) -> tuple[float, float]:
    """Operation counts at the observed mean iteration count (affine in t)."""
    lo = int(math.floor(mean_t))
    frac = mean_t - lo
    m_lo, a_lo = complexity_counts(cfg.ofdm.n_subcarriers, cfg.num_tx, cfg.num_rx, lo)
    if frac == 0.0:
        return float(m_lo), float(a_lo)
    m_hi, a_hi = complexity_counts(cfg.ofdm.n_subcarriers, cfg.num_tx, cfg.num_rx, lo + 1)
    return m_lo + frac * (m_hi - m_lo), a_lo + frac * (a_hi - a_lo)


# ---------------------------------------------------------------------------
# Export / import
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def export_results(records, path, fmt: str = "csv", cfg: CampaignConfig | None = None) -> Path:
    """Write records to CSV (fixed column order) or JSON with a metadata header."""
    if not records:
        raise CampaignError("no records to export")
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in records:
                writer.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    elif fmt == "json":
        meta = {"version": __version__}
        if cfg is not None:
            meta.update(seed=cfg.seed, config_hash=config_hash(cfg), name=cfg.name)
        payload = {
            "metadata": meta,
            "records": [{c: getattr(r, c) for c in CSV_COLUMNS} for r in records],
        }
        path.write_text(json.dumps(payload, indent=2) + "\n")
    else:
        raise CampaignError(f"unknown format {fmt!r}")
    return path


def load_results(path) -> list[ResultRecord]:
    """Parse an exported result file (either format) back into records."""
    path = Path(path)
    rows = []
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        rows = payload["records"]
    else:
        with path.open() as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames) != CSV_COLUMNS:
                raise CampaignError(f"unexpected columns in {path}")
            rows = list(reader)
    records = []
    for row in rows:
        records.append(ResultRecord(
            snr_db=float(row["snr_db"]),
            sigma2_delta=float(row["sigma2_delta"]),
            nt=int(row["nt"]),
            nr=int(row["nr"]),
            qam=int(row["qam"]),
            detector=row["detector"],
            trials=int(row["trials"]),
            uncoded_ber=float(row["uncoded_ber"]),
            ber_ci=float(row["ber_ci"]),
            coded_ber=None if row["coded_ber"] in ("", None) else float(row["coded_ber"]),
            psnr_db=float(row["psnr_db"]),
            mean_iters=float(row["mean_iters"]),
            c_mult=float(row["c_mult"]),
            c_add=float(row["c_add"]),
            failures=int(row["failures"]),
        ))
    return records
