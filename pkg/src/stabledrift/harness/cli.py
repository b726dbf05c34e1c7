"""Command-line entry point: one subcommand per experiment plus ``reproduce``.

Exit status: 0 when every non-skipped check passes, 1 on a failed check,
2 on configuration or resource errors.
"""

from __future__ import annotations

import sys

import click

from .config import EXPERIMENTS, ConfigError, load_config
from .experiments import reproduce, run

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _finish(report) -> None:
    click.echo(report.summary())
    click.echo(f"{report.experiment}: {'PASS' if report.passed else 'FAIL'} "
               f"({report.wall_clock:.1f} s)")
    sys.exit(EXIT_PASS if report.passed else EXIT_FAIL)


def _experiment_command(name: str) -> click.Command:
    @click.command(name=name, help=f"Run the {name} experiment.")
    @click.option("--config", "config_path", type=click.Path(dir_okay=False),
                  help="TOML configuration file.")
    @click.option("--seed", type=int, help="Override sim.seed.")
    @click.option("--out", type=click.Path(file_okay=False), help="Output directory.")
    @click.option("--override", "overrides", multiple=True, metavar="KEY=VALUE",
                  help="Dotted key override, e.g. params.gamma=0.8 (repeatable).")
    def command(config_path, seed, out, overrides):
        try:
            cfg = load_config(config_path, experiment=name, overrides=overrides, seed=seed)
            report = run(cfg, out)
        except ConfigError as exc:
            click.echo(f"configuration error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
        _finish(report)

    return command


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Stable-driven SDE/PDE experiments with distributional drifts."""


for _name in EXPERIMENTS:
    main.add_command(_experiment_command(_name))


@main.command(name="reproduce")
@click.argument("manifest", type=click.Path(dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), help="Output directory of the rerun.")
def reproduce_command(manifest, out):
    """Rerun a manifest and compare CSV digests."""
    try:
        report = reproduce(manifest, out)
    except ConfigError as exc:
        click.echo(f"reproduce error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    _finish(report)


if __name__ == "__main__":
    main()
