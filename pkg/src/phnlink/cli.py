"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical-failure threshold
exceeded during a campaign.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from .config import load_config
from .detector import complexity_counts
from .exceptions import CampaignError, ConfigError
from .harness import export_results, run_campaign
from .video import fit_rd_params


@click.group()
def main():
    """MIMO-OFDM phase-noise-tracking link simulator."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Campaign YAML file.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Output file for the result table.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
              show_default=True)
@click.option("--workers", type=int, default=None,
              help="Parallel worker processes (overrides config).")
@click.option("--seed", type=int, default=None, help="Base seed (overrides config).")
@click.option("--figures/--no-figures", default=True, show_default=True,
              help="Render BER/PSNR/iteration figures next to the output.")
def simulate(config_path, out_path, fmt, workers, seed, figures):
    """Run a Monte Carlo campaign and export the result table."""
    try:
        cfg = load_config(config_path)
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if workers is not None:
            cfg = replace(cfg, workers=workers)
        records = run_campaign(cfg, log=lambda msg: click.echo(msg, err=True))
        out = export_results(records, out_path, fmt=fmt, cfg=cfg)
        click.echo(f"wrote {out}")
        if figures:
            from .plots import render_figures

            for fig_path in render_figures(records, Path(out_path).with_suffix("")):
                click.echo(f"wrote {fig_path}")
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except CampaignError as exc:
        click.echo(f"campaign error: {exc}", err=True)
        sys.exit(3)


@main.command("fit-rd")
@click.option("--input", "input_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="CSV of rate_bps,mse rows (header optional).")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def fit_rd(input_path, out_path):
    """Fit rate-distortion constants (a, b, z) to measured points."""
    rates, mses = [], []
    with open(input_path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            try:
                r, d = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                continue  # header or malformed line
            rates.append(r)
            mses.append(d)
    try:
        fitted = fit_rd_params(rates, mses)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    Path(out_path).write_text(json.dumps(fitted, indent=2) + "\n")
    click.echo(f"wrote {out_path}: a={fitted['a']:.4g} b={fitted['b']:.4g} "
               f"z={fitted['z']:.4g} (rmse {fitted['rmse']:.3g})")


@main.command()
@click.option("--n", type=int, required=True, help="Subcarrier count.")
@click.option("--nt", type=int, required=True, help="Transmit antennas.")
@click.option("--nr", type=int, required=True, help="Receive antennas.")
@click.option("--t", type=int, required=True, help="Outer iterations.")
def complexity(n, nt, nr, t):
    """Print the complex multiplication/addition counts of the receiver."""
    try:
        mults, adds = complexity_counts(n, nt, nr, t)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    click.echo(f"multiplications: {mults}")
    click.echo(f"additions:       {adds}")


if __name__ == "__main__":
    main()
