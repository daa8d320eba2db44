"""Command-line front end for grid sweeps, plots, and trajectory ensembles.

Exit codes: 0 success, 2 configuration error, 3 completed with unconverged
grid points.  The default worker count comes from the SSETDYN_WORKERS
environment variable.
"""

from __future__ import annotations

import sys

import click

from . import sweep as sweep_mod

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


@click.group()
def main():
    """Dynamical phase diagrams of an SSET-resonator system."""


def _load(config_path: str) -> sweep_mod.SweepConfig:
    try:
        return sweep_mod.load_config(config_path)
    except sweep_mod.ConfigError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(EXIT_CONFIG)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=False))
@click.option("--workers", type=int, default=None, help="worker processes")
@click.option("--resume", is_flag=True, help="skip rows already in the output file")
def run(config_path, workers, resume):
    """Run a grid sweep and write the dataset CSV."""
    import dataclasses

    cfg = _load(config_path)
    if workers is not None:
        cfg = dataclasses.replace(cfg, workers=workers)
    dataset = sweep_mod.run_sweep(cfg, resume=resume)
    bad = sum(1 for r in dataset.rows if str(r.get("converged")) != "True")
    click.echo(f"wrote {len(dataset.rows)} rows to {dataset.path} "
               f"({bad} unconverged)")
    sys.exit(EXIT_OK if bad == 0 else EXIT_PARTIAL)


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--style", type=click.Choice(["heatmap", "cuts"]), default="heatmap")
def plot(data_path, style):
    """Emit a gnuplot script and tidy data files for a dataset."""
    try:
        paths = sweep_mod.emit_plots(data_path, style)
    except sweep_mod.ConfigError as err:
        click.echo(f"config error: {err}", err=True)
        sys.exit(EXIT_CONFIG)
    for p in paths:
        click.echo(p)
    sys.exit(EXIT_OK)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=False))
def compare(config_path):
    """Compare spectral and mean-field activities on a shared grid."""
    cfg = _load(config_path)
    report = sweep_mod.compare_engines(cfg)
    click.echo(f"mean |dk| = {report.mean_abs_diff:.3e}, "
               f"max |dk| = {report.max_abs_diff:.3e}")
    for s, b_spectral, b_meanfield in report.boundaries:
        click.echo(f"s={s:+.4f}: boundary spectral={b_spectral:.4f} "
                   f"meanfield={b_meanfield:.4f}")
    click.echo(f"table: {report.table_path}")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=False))
def traj(config_path):
    """Sample a trajectory ensemble and export jump records."""
    import dataclasses

    cfg = _load(config_path)
    cfg = dataclasses.replace(cfg, engine="trajectory")
    dataset = sweep_mod.run_sweep(cfg)
    masked = sum(1 for r in dataset.rows if str(r.get("converged")) != "True")
    click.echo(f"wrote {len(dataset.rows)} theta_hat points to {dataset.path} "
               f"({masked} masked), jumps in {dataset.path}.jumps")
    sys.exit(EXIT_OK if masked == 0 else EXIT_PARTIAL)


if __name__ == "__main__":
    main()
