"""
quantcoop CLI: analyze, synthesize, simulate and witness runs for quantized
cooperative stabilization, plus the bundled worked example.

Usage:
    # Check the standing assumptions of a configuration
    quantcoop analyze --config experiment.json

    # Resolve "auto" gains, gamma and level counts
    quantcoop synthesize --config experiment.json --out runs/synth

    # Simulate and cross-check against the coupled formulation
    quantcoop simulate --config experiment.json --seed 7 --oracle

    # Construct a failure witness for a violated assumption
    quantcoop witness --config bad_plant.json --kind undetectable

    # Rerun the worked example over 100 seeds
    quantcoop reproduce-paper --seeds 100

Exit codes: 0 success, 1 run finished but a check failed, 2 configuration
error, 3 infeasible or inapplicable, 4 oracle mismatch.
"""

import sys
from collections.abc import Callable
from pathlib import Path
from typing import TypeVar

import click
from dotenv import load_dotenv

from quantcoop import __version__
from quantcoop.config import DEFAULT_OUT_DIR, EXAMPLE_PRESET

load_dotenv()

T = TypeVar("T")

EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_ORACLE = 4


def _guarded(action: Callable[[], T]) -> T:
    """Run a command body, mapping expected errors to a red line and an exit code."""
    from rich.markup import escape

    from quantcoop.models import (
        ConfigError,
        InfeasibleError,
        OracleMismatchError,
        QuantCoopError,
        WitnessInapplicable,
    )
    from quantcoop.utils import err_console

    try:
        return action()
    except ConfigError as exc:
        err_console.print(f"[bold red]Configuration error:[/bold red] {escape(str(exc))}")
        for line in exc.diagnostics:
            err_console.print(f"  {escape(line)}")
        sys.exit(EXIT_CONFIG)
    except (InfeasibleError, WitnessInapplicable) as exc:
        err_console.print(f"[bold red]Infeasible:[/bold red] {escape(str(exc))}")
        sys.exit(EXIT_INFEASIBLE)
    except OracleMismatchError as exc:
        err_console.print(f"[bold red]Oracle mismatch:[/bold red] {escape(str(exc))}")
        sys.exit(EXIT_ORACLE)
    except QuantCoopError as exc:
        err_console.print(f"[bold red]Failed:[/bold red] {escape(str(exc))}")
        sys.exit(EXIT_FAILED)


def _load(config: Path | None, seed: int | None, horizon: int | None, out: Path | None, formats: tuple[str, ...]):
    from quantcoop.experiment import load_config
    from quantcoop.utils import console

    if config is None:
        console.print(f"[dim]No --config given; using the bundled preset {EXAMPLE_PRESET.stem}[/dim]")
        config = EXAMPLE_PRESET
    cfg = load_config(config)
    return cfg.with_overrides(seed=seed, horizon=horizon, out_dir=out, formats=formats or None)


# ---------------------------------------------------------------------------
# Shared options
# ---------------------------------------------------------------------------

config_option = click.option(
    "--config", "-c",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Experiment description (JSON, schema quantcoop/1). Defaults to the bundled worked example.",
)
seed_option = click.option(
    "--seed", "-s",
    type=click.IntRange(min=0),
    default=None,
    envvar="QUANTCOOP_SEED",
    help="Seed for initial conditions and searches. Overrides the config; env QUANTCOOP_SEED.",
)
horizon_option = click.option(
    "--horizon", "-n",
    type=click.IntRange(min=1),
    default=None,
    help="Number of steps to simulate. Overrides the config.",
)
out_option = click.option(
    "--out", "-o",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    envvar="QUANTCOOP_OUT_DIR",
    help="Output directory. Overrides the config; env QUANTCOOP_OUT_DIR.",
)
format_option = click.option(
    "--format", "-f", "formats",
    type=click.Choice(["csv", "json"]),
    multiple=True,
    help="Output formats; repeat for several. Defaults to the config's list.",
)


@click.group()
@click.version_option(version=__version__)
@click.option("--quiet", "-q", is_flag=True, help="Print errors only.")
@click.option("--verbose", "-v", is_flag=True, help="Print per-term sizing diagnostics.")
@click.pass_context
def cli(ctx: click.Context, quiet: bool, verbose: bool):
    """quantcoop: quantized cooperative stabilization and inter-agent observation."""
    from quantcoop.utils import console

    console.quiet = quiet
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose


@cli.command()
@config_option
@out_option
def analyze(config: Path | None, out: Path | None):
    """Check detectability, stabilizability, the graph spectrum and A1 / A1'."""
    from quantcoop.runner import run_analyze

    def body():
        cfg = _load(config, None, None, None, ())
        return run_analyze(cfg, out_dir=out)

    _guarded(body)
    sys.exit(0)


@cli.command()
@config_option
@seed_option
@out_option
@click.option(
    "--level-search",
    type=click.Choice(["bound", "empirical"]),
    default=None,
    help="Force L and L_u to be synthesized with this method.",
)
@click.option(
    "--budget",
    type=click.IntRange(min=1),
    default=None,
    help="Objective evaluations allowed for each gain search.",
)
@click.pass_context
def synthesize(
    ctx: click.Context,
    config: Path | None,
    seed: int | None,
    out: Path | None,
    level_search: str | None,
    budget: int | None,
):
    """Resolve "auto" gains, gamma and level counts; write a runnable resolved config."""
    from quantcoop.runner import run_synthesize

    def body():
        cfg = _load(config, seed, None, out, ())
        return run_synthesize(
            cfg, out or cfg.out_dir, level_search=level_search, budget=budget, verbose=ctx.obj["verbose"]
        )

    _guarded(body)
    sys.exit(0)


@cli.command()
@config_option
@seed_option
@horizon_option
@out_option
@format_option
@click.option("--oracle", is_flag=True, help="Also run the coupled formulation and require agreement.")
@click.option("--baseline", is_flag=True, help="Also run the unquantized state-feedback baseline.")
def simulate(
    config: Path | None,
    seed: int | None,
    horizon: int | None,
    out: Path | None,
    formats: tuple[str, ...],
    oracle: bool,
    baseline: bool,
):
    """Simulate the quantized network and write trace, metrics and plot files."""
    from quantcoop.runner import run_simulate

    def body():
        cfg = _load(config, seed, horizon, out, formats)
        return run_simulate(cfg, cfg.out_dir, oracle=oracle, baseline=baseline)

    outcome = _guarded(body)
    sys.exit(0 if outcome.success else EXIT_FAILED)


@cli.command()
@config_option
@seed_option
@horizon_option
@out_option
@click.option(
    "--kind", "-k",
    type=click.Choice(["undetectable", "unstabilizable", "schur-growth"]),
    required=True,
    help="Which failed assumption to demonstrate.",
)
@click.option(
    "--constant-rule",
    type=click.Choice(["local", "global"]),
    default="local",
    show_default=True,
    help="Amplitude rule for the schur-growth witness.",
)
@click.option(
    "--varrho",
    type=click.FloatRange(min=0.0, max=1.0, min_open=True, max_open=True),
    default=None,
    help="Rate bound for the schur-growth witness; defaults to gamma.",
)
def witness(
    config: Path | None,
    seed: int | None,
    horizon: int | None,
    out: Path | None,
    kind: str,
    constant_rule: str,
    varrho: float | None,
):
    """Build an initial condition whose trajectory defeats the failed assumption."""
    from quantcoop.runner import run_witness

    def body():
        cfg = _load(config, seed, None, out, ())
        return run_witness(cfg, kind, cfg.out_dir, horizon=horizon, constant_rule=constant_rule, varrho=varrho)

    report = _guarded(body)
    sys.exit(0 if report.holds else EXIT_FAILED)


@cli.command("reproduce-paper")
@seed_option
@horizon_option
@out_option
@format_option
@click.option(
    "--seeds",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help="Number of consecutive seeds to run.",
)
@click.option(
    "--levels",
    type=click.IntRange(min=1),
    default=None,
    help="Override L = L_u (values below what the example needs give a negative control).",
)
def reproduce_paper(
    seed: int | None,
    horizon: int | None,
    out: Path | None,
    formats: tuple[str, ...],
    seeds: int,
    levels: int | None,
):
    """Rerun the bundled worked example and check the acceptance thresholds."""
    from quantcoop.runner import run_reproduce

    def body():
        return run_reproduce(
            out or DEFAULT_OUT_DIR / "reproduce",
            seed=seed,
            seeds=seeds,
            levels=levels,
            horizon=horizon,
            formats=formats or None,
        )

    outcome = _guarded(body)
    sys.exit(0 if outcome.success else EXIT_FAILED)


if __name__ == "__main__":
    cli()
