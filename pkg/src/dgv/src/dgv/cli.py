"""CLI entrypoint for DG Verification."""

import functools
import logging
import sys
from pathlib import Path

import click

from dgk.errors import ConfigError, DgkError, KernelError, NonPositiveDt, StateError

from .config import build_run_config, load_config_file
from .formatter import (
    format_summary,
    write_errors_csv,
    write_field_dump,
    write_q_criterion,
    write_scaling_csv,
    write_tgv_csv,
)
from .logging_config import setup_logging
from .runner import CaseRunner, MeshRun, error_table, run_summary

logger = logging.getLogger(__name__)

EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


@click.group()
@click.pass_context
def main(ctx: click.Context):
    """DG Verification - run DG gas-kinetic cases and write accuracy tables.

    Logs are written to: {tempdir}/dgv.log
    Set DGV_LOG_LEVEL environment variable to control verbosity (DEBUG, INFO, WARNING, ERROR)
    """
    log_file = setup_logging()
    ctx.call_on_close(lambda: click.echo(f"Logs: {log_file}", err=True))


def run_options(command):
    """Options shared by every subcommand; each maps to a run configuration key."""
    options = [
        click.option("--case", type=str, help="Case id: adv2d, adv3d, vortex2d or tgv"),
        click.option("--order", type=str, help="Polynomial order: p2 or p3"),
        click.option("--mesh", type=str, help="Cells per axis, comma-separated (e.g. 8,16,32)"),
        click.option("--nonuniform/--uniform", default=None, help="Use the sinusoidally perturbed mesh"),
        click.option("--cfl", type=float, help="CFL number (default 0.15 for p2, 0.09 for p3)"),
        click.option("--dt", type=float, help="Fixed time step overriding the CFL estimate"),
        click.option("--tend", type=float, help="Final time (default per case)"),
        click.option("--workers", type=int, help="Worker threads (default $DGV_WORKERS or 1)"),
        click.option("--out", type=click.Path(file_okay=False, path_type=Path), help="Output directory"),
        click.option("--emit-fields/--no-emit-fields", default=None, help="Dump cell-average fields"),
        click.option("--record-every", type=float, help="Taylor-Green record interval"),
        click.option("--flux-points", type=int, help="Gauss points per axis for flux quadrature"),
        click.option(
            "--time-derivative",
            type=str,
            help="Flux time derivative: kinetic or operator (default operator for inviscid cases)",
        ),
        click.option(
            "--config",
            "config_file",
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            help="key=value file; command-line flags take precedence",
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def handle_errors(command):
    """Map solver and configuration errors to exit codes."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ConfigError as e:
            click.echo(f"Error: invalid {e}", err=True)
            sys.exit(EXIT_CONFIG)
        except (StateError, NonPositiveDt, KernelError) as e:
            logger.exception("Numerical failure")
            click.echo(f"Error: numerical failure: {e}", err=True)
            sys.exit(EXIT_NUMERICAL)
        except DgkError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_NUMERICAL)
        except Exception as e:
            logger.exception("Unexpected error")
            click.echo(f"Unexpected error: {e}", err=True)
            sys.exit(EXIT_NUMERICAL)

    return wrapper


def _load(config_file: Path | None, **overrides):
    file_values = load_config_file(config_file) if config_file else None
    return build_run_config(file_values, **overrides)


def _emit_fields(runs: list[MeshRun], out: Path) -> None:
    for run in runs:
        tag = f"{run.case.name}_p{run.basis.k}_n{run.n}_t{run.state.time:g}"
        write_field_dump(run.state, run.mesh, run.gas, out / f"field_{tag}.csv")
        if run.case.name == "tgv":
            write_q_criterion(run.state, run.mesh, run.basis, out / f"qcriterion_{tag}.csv")


def _write_results(config, runs: list[MeshRun]) -> str:
    out = config["out"]
    if config["case"] == "tgv":
        path = write_tgv_csv(runs[-1].records, out / "tgv.csv")
        table = [
            {"t": r.t, "Ek": r.ek, "epsEk": r.eps_ek, "epsZeta": r.eps_zeta}
            for r in runs[-1].records[:: max(len(runs[-1].records) // 10, 1)]
        ]
    else:
        rows = error_table(runs)
        path = write_errors_csv(rows, out / "errors.csv")
        table = list(rows)
    if config["emit_fields"]:
        _emit_fields(runs, out)
    logger.info(f"Wrote {path}")
    return format_summary(run_summary(config, runs), table)


@main.command()
@run_options
@handle_errors
def run(config_file: Path | None, **overrides):
    """Run a case on every configured mesh and write errors.csv or tgv.csv."""
    config = _load(config_file, **overrides)
    runs = CaseRunner(config).run()
    click.echo(_write_results(config, runs))


@main.command()
@run_options
@handle_errors
def study(config_file: Path | None, **overrides):
    """Convergence study over doubling meshes; writes errors.csv with order columns."""
    config = _load(config_file, **overrides)
    runs, _ = CaseRunner(config).convergence_study()
    click.echo(_write_results(config, runs))


@main.command()
@run_options
@click.option(
    "--worker-counts",
    default="1,2,4",
    show_default=True,
    help="Worker counts to time, comma-separated",
)
@handle_errors
def scale(config_file: Path | None, worker_counts: str, **overrides):
    """Time a case per mesh size and worker count; writes scaling.csv."""
    config = _load(config_file, **overrides)
    try:
        counts = [int(w) for w in worker_counts.split(",") if w.strip()]
    except ValueError:
        raise ConfigError("worker_counts", f"expected comma-separated integers, got {worker_counts!r}")
    if not counts or min(counts) < 1:
        raise ConfigError("worker_counts", "worker counts must be positive")
    rows = CaseRunner(config).scale(counts)
    path = write_scaling_csv(rows, config["out"] / "scaling.csv")
    logger.info(f"Wrote {path}")
    click.echo(format_summary({"case": config["case"], "sizes": ",".join(map(str, config["mesh"]))}, rows))


if __name__ == "__main__":
    main()
