"""Command-line interface.

    qutrit-ctrl <command> --config job.json [--out DIR] [--threads N] [--seed S]

Every command reads one JSON job file, computes its grids, and writes a
CSV, a JSON metadata sidecar (code version, configuration hash, wall
time), and a PNG figure per result into the output directory. Exit codes:
0 on success, 2 for configuration errors, 3 for numerical failures.
"""

from __future__ import annotations

import sys
import time
from dataclasses import replace
from pathlib import Path

import click

from . import figures, sweeps
from .evolve import IntegrationFailure
from .jobio import (
    CODE_VERSION,
    COMMANDS,
    ConfigError,
    ResultError,
    load_config,
    write_result,
)
from .robustness import FluctuationSampleError
from .stark import StarkPoleError

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_HELP = {
    "spectroscopy-2d": "Probe-line map over (two-photon detuning, probe detuning).",
    "spectroscopy-amp": "Stark shifts versus drive amplitude and the two-photon "
    "resonance line.",
    "transfer": "One superadiabatic transfer: dynamical versus constant phase "
    "correction, with the correction phases.",
    "sweep-delta-amp": "Transfer maps over single-photon detuning and STIRAP "
    "amplitude (bare, superadiabatic, and reverse).",
    "gate-scan": "NOT-gate populations and fidelities across the initial-state "
    "family.",
    "robustness": "Fluctuation-averaged gate fidelities against the two-photon "
    "pi pulse, plus the drive landscape.",
}


@click.group()
@click.version_option(CODE_VERSION, prog_name="qutrit-ctrl")
def main() -> None:
    """Superadiabatic three-level population transfer: sweeps and reports."""


def _execute(name: str, config_path: str, out_dir, threads: int, seed) -> None:
    t0 = time.perf_counter()
    try:
        job = load_config(config_path)
        if job.command != name:
            raise ConfigError(
                f"config file names command '{job.command}' but was invoked "
                f"as '{name}'"
            )
        if seed is not None:
            job = replace(job, seed=seed)
        results = sweeps.run_command(job, threads=threads)
    except (ConfigError, StarkPoleError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (
        IntegrationFailure,
        ResultError,
        FluctuationSampleError,
        FloatingPointError,
    ) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    wall = time.perf_counter() - t0
    directory = Path(out_dir) if out_dir else Path(job.output or ".")
    for basename, result in results:
        csv_path, meta_path = write_result(
            result, directory, basename, job=job, wall_time=wall
        )
        png_path = figures.render_result(result, directory / f"{basename}.png")
        click.echo(f"{result.kind}: {csv_path} + {meta_path.name} + {png_path.name}")
    click.echo(f"done in {wall:.1f} s")


def _make_command(name: str):
    @click.command(name=name, help=_HELP[name])
    @click.option(
        "--config",
        "config_path",
        required=True,
        metavar="JOB.JSON",
        help="Job configuration file.",
    )
    @click.option(
        "--out",
        "out_dir",
        default=None,
        metavar="DIR",
        help="Output directory (default: the job's 'output' field, else '.').",
    )
    @click.option(
        "--threads",
        default=1,
        show_default=True,
        type=click.IntRange(min=1),
        help="Worker-pool bound for independent grid cells.",
    )
    @click.option("--seed", default=None, type=int, help="Override the job's seed.")
    def command(config_path, out_dir, threads, seed):
        _execute(name, config_path, out_dir, threads, seed)

    return command


for _name in COMMANDS:
    main.add_command(_make_command(_name))


if __name__ == "__main__":
    main()
