"""Render BER / PSNR / iteration figures from result records.

Figures land next to the delimited output: for an output stem ``results``
the renderer writes ``results_ber.png``, ``results_psnr.png`` and
``results_iters.png`` (plus ``results_coded_ber.png`` when coded results are
present).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_MARKERS = ("o", "s", "^", "v", "d", "x", "*", "+")
_LABELS = {
    "proposed": "Proposed det.",
    "perfect": "Perfect PHN est.",
    "no_tracking": "No PHN tracking",
    "pilot": "Pilot CPE",
}


def _series(records):
    """Group records into {(detector, sigma2_delta): sorted-by-snr list}."""
    groups = {}
    for r in records:
        groups.setdefault((r.detector, r.sigma2_delta), []).append(r)
    for key in groups:
        groups[key].sort(key=lambda r: r.snr_db)
    return dict(sorted(groups.items()))


def _plot_metric(records, value_of, ylabel, path, logy=False):
    fig, ax = plt.subplots(figsize=(7, 5))
    plotted = False
    for i, ((det, s2d), recs) in enumerate(_series(records).items()):
        xs = [r.snr_db for r in recs]
        ys = [value_of(r) for r in recs]
        if any(y is None for y in ys):
            continue
        label = f"{_LABELS.get(det, det)}, $\\sigma_\\delta^2$={s2d:g}"
        if logy:
            ys = [max(y, 1e-12) for y in ys]
            ax.semilogy(xs, ys, marker=_MARKERS[i % len(_MARKERS)], label=label)
        else:
            ax.plot(xs, ys, marker=_MARKERS[i % len(_MARKERS)], label=label)
        plotted = True
    if not plotted:
        plt.close(fig)
        return None
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.4)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_figures(records, out_stem) -> list[Path]:
    """Write the standard figure set for a result list; returns created paths."""
    stem = Path(out_stem)
    created = []
    p = _plot_metric(records, lambda r: r.uncoded_ber, "Uncoded BER",
                     stem.with_name(stem.name + "_ber.png"), logy=True)
    if p:
        created.append(p)
    if any(r.coded_ber is not None for r in records):
        p = _plot_metric(records, lambda r: r.coded_ber, "Coded BER",
                         stem.with_name(stem.name + "_coded_ber.png"), logy=True)
        if p:
            created.append(p)
    p = _plot_metric(records, lambda r: r.psnr_db, "PSNR (dB)",
                     stem.with_name(stem.name + "_psnr.png"))
    if p:
        created.append(p)
    p = _plot_metric(records, lambda r: r.mean_iters, "Mean iterations",
                     stem.with_name(stem.name + "_iters.png"))
    if p:
        created.append(p)
    return created
