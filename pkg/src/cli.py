"""Command-line interface for the Riemannian Gauss-Newton CPD toolkit."""

import sys
import logging
from pathlib import Path
from typing import Dict, List, Optional

import click
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table
from rich.progress import Progress, SpinnerColumn, TextColumn

from src.rgn import ExperimentSpec, InvalidInputError, IterationTrace, PencilResult, PropertyReport
from src.rgn.checks import PROPERTIES, PropertyChecker
from src.rgn.cpd_model import condition_number
from src.rgn.experiments import ExperimentRunner
from src.rgn.solver import config_from_dict, solve
from src.utils.io import (
    load_config,
    load_decomposition,
    load_tensor,
    save_decomposition,
    save_trace_csv,
)
from src.utils.logging import setup_logging


logger = logging.getLogger(__name__)
console = Console()

EXIT_FAILURE = 1
EXIT_INPUT_ERROR = 2


def _common_options(fn):
    fn = click.option("--verbose", is_flag=True, help="Verbose output")(fn)
    fn = click.option(
        "--config",
        type=click.Path(),
        default="config.yml",
        help="Configuration file path"
    )(fn)
    return fn


def _load(config: str, verbose: bool) -> Dict:
    """Load configuration (or defaults) and set up logging."""
    try:
        if Path(config).exists():
            cfg = load_config(config)
        else:
            console.print(f"[yellow]Config file not found: {config}, using defaults[/yellow]")
            cfg = _get_default_config()
    except Exception as e:
        console.print(f"[red]Error loading config: {e}[/red]")
        sys.exit(EXIT_INPUT_ERROR)

    log_cfg = cfg.get("logging", {})
    log_level = "DEBUG" if verbose else log_cfg.get("level", "INFO")
    setup_logging(level=log_level, log_file=log_cfg.get("file"), log_format=log_cfg.get("format"))
    return cfg


def _input_error(e: Exception) -> None:
    console.print(f"[red]Input error: {e}[/red]")
    sys.exit(EXIT_INPUT_ERROR)


def _parse_s_values(raw: str) -> List[int]:
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise InvalidInputError(f"--s expects comma-separated nonnegative integers, got {raw!r}")


@click.group()
@click.version_option(version="1.0.0")
def cli():
    """RGN-CPD - Riemannian Gauss-Newton for rank-r CP decompositions."""
    pass


@cli.command()
@click.option(
    "--dec",
    required=True,
    type=click.Path(exists=True),
    help="Decomposition file (JSON)"
)
@_common_options
def condition(dec: str, config: str, verbose: bool):
    """Print the geometric condition number of a decomposition."""
    _load(config, verbose)
    try:
        point = load_decomposition(dec)
        report = condition_number(point)
    except InvalidInputError as e:
        _input_error(e)

    table = Table(title=f"Condition of {Path(dec).name}")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", justify="right", style="green")
    table.add_row("rank", str(point.rank))
    table.add_row("shape", "x".join(str(m) for m in point.shape.mode_sizes))
    table.add_row("kappa", f"{report.kappa:.6e}")
    table.add_row("sigma_min", f"{report.sigma_min:.6e}")
    table.add_row("sigma_max", f"{report.full_spectrum[0]:.6e}")
    console.print(table)


@cli.command("solve")
@click.option("--tensor", required=True, type=click.Path(exists=True), help="Target tensor file (JSON)")
@click.option("--init", "init", required=True, type=click.Path(exists=True), help="Starting decomposition file (JSON)")
@click.option("--max-iters", type=int, default=None, help="Iteration cap")
@click.option("--grad-tol", type=float, default=None, help="Gradient-norm tolerance")
@click.option("--trace", "trace_path", required=True, type=click.Path(), help="Output trace CSV")
@click.option("--out-dec", type=click.Path(), default=None, help="Write the final decomposition here")
@_common_options
def solve_command(
    tensor: str,
    init: str,
    max_iters: Optional[int],
    grad_tol: Optional[float],
    trace_path: str,
    out_dec: Optional[str],
    config: str,
    verbose: bool
):
    """Run Riemannian Gauss-Newton from a starting decomposition."""
    cfg = _load(config, verbose)
    try:
        target = load_tensor(tensor)
        x0 = load_decomposition(init)
        solver_cfg = config_from_dict(cfg, max_iters=max_iters, grad_tol=grad_tol)
        x, trace = solve(target, x0, solver_cfg)
    except (InvalidInputError, ValidationError) as e:
        _input_error(e)

    save_trace_csv(trace, trace_path)
    console.print(f"✓ Trace: {trace_path}")
    if out_dec:
        save_decomposition(x, out_dec)
        console.print(f"✓ Decomposition: {out_dec}")

    _show_trace_summary(trace)
    if trace.status.is_failure:
        console.print(f"[red]Solver failed: {trace.message}[/red]")
        sys.exit(EXIT_FAILURE)


@cli.command()
@click.option("--kind", type=click.Choice(["random", "adversarial"]), default=None, help="Perturbation experiment")
@click.option("--s", "s_values", default=None, help="Comma-separated s values, e.g. 0,1,3,5")
@click.option("--seed", type=int, default=None, help="Random seed (unsigned 64-bit)")
@click.option("--start-pert", type=float, default=None, help="Start perturbation magnitude")
@click.option("--data-pert", type=float, default=None, help="Data perturbation magnitude")
@click.option("--quad-start-pert", type=float, default=None, help="Start perturbation of the zero-residual runs")
@click.option("--zero-residual", is_flag=True, help="Only run the zero-residual (quadratic) regime")
@click.option("--out", required=True, type=click.Path(), help="Output directory")
@_common_options
def experiment(
    kind: Optional[str],
    s_values: Optional[str],
    seed: Optional[int],
    start_pert: Optional[float],
    data_pert: Optional[float],
    quad_start_pert: Optional[float],
    zero_residual: bool,
    out: str,
    config: str,
    verbose: bool
):
    """Run the pencil perturbation experiments and write their artifacts."""
    cfg = _load(config, verbose)
    exp_cfg = cfg.get("experiment", {})
    try:
        spec = ExperimentSpec(
            kind=kind or exp_cfg.get("kind", "random"),
            s_values=_parse_s_values(s_values) if s_values else exp_cfg.get("s_values", [0, 1, 3, 5]),
            seed=seed if seed is not None else exp_cfg.get("seed", 0),
            start_perturbation=start_pert or exp_cfg.get("start_perturbation", 1e-6),
            data_perturbation=data_pert or exp_cfg.get("data_perturbation", 1e-6),
            quadratic_start_perturbation=quad_start_pert or exp_cfg.get("quadratic_start_perturbation", 1e-2),
            zero_residual=zero_residual or exp_cfg.get("zero_residual", False),
        )
        runner = ExperimentRunner(cfg)
    except (InvalidInputError, ValidationError) as e:
        _input_error(e)

    console.print("[bold blue]RGN-CPD experiment[/bold blue]")
    console.print(f"{spec.kind.value} perturbations, s = {spec.s_values}, seed = {spec.seed}")

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        console=console,
    ) as progress:
        task = progress.add_task("Running pencils...", total=None)
        runs = runner.run(spec)
        progress.update(task, completed=True)
        console.print(f"✓ Finished {len(runs)} s-values")

        task = progress.add_task("Writing artifacts...", total=None)
        runner.write(runs, out, spec)
        progress.update(task, completed=True)
        console.print(f"✓ Artifacts: {out}")

    results = [run.result for run in runs]
    _show_results(results)
    if any(r.failed for r in results):
        console.print("[red]At least one solve failed; see report.md[/red]")
        sys.exit(EXIT_FAILURE)
    console.print("\n[bold green]Experiment complete![/bold green]")


@cli.command()
@click.option("--property", "prop", required=True, type=click.Choice(list(PROPERTIES)), help="Property suite")
@click.option("--seed", type=int, default=0, help="Random seed (unsigned 64-bit)")
@_common_options
def check(prop: str, seed: int, config: str, verbose: bool):
    """Run a numerical property suite."""
    cfg = _load(config, verbose)
    if not 0 <= seed < 2**64:
        _input_error(InvalidInputError(f"seed must be an unsigned 64-bit integer, got {seed}"))
    try:
        report = PropertyChecker(cfg).run(prop, seed)
    except InvalidInputError as e:
        _input_error(e)

    _show_property(report)
    if not report.passed:
        sys.exit(EXIT_FAILURE)


def _show_trace_summary(trace: IterationTrace):
    """Display the last rows of a solve."""
    table = Table(title=f"Solve: {trace.status.value}")
    table.add_column("iter", justify="right", style="cyan")
    table.add_column("residual", justify="right", style="green")
    table.add_column("grad_norm", justify="right", style="green")
    table.add_column("step_norm", justify="right", style="yellow")
    table.add_column("kappa", justify="right", style="magenta")

    for rec in trace.records[-10:]:  # Show last 10
        table.add_row(
            str(rec.iter),
            f"{rec.residual:.3e}",
            f"{rec.grad_norm:.3e}",
            f"{rec.step_norm:.3e}",
            f"{rec.kappa:.3e}"
        )

    console.print(table)


def _fmt(value: Optional[float], spec: str = ".3e") -> str:
    return "-" if value is None else format(value, spec)


def _show_results(results: List[PencilResult]):
    """Display per-s summary table."""
    table = Table(title="Per-s results")
    table.add_column("s", justify="right", style="cyan")
    table.add_column("kappa(x*)", justify="right", style="magenta")
    table.add_column("residual*", justify="right")
    table.add_column("fitted rate", justify="right", style="green")
    table.add_column("theoretical rate", justify="right", style="green")
    table.add_column("linear order", justify="right", style="yellow")
    table.add_column("quadratic order", justify="right", style="yellow")

    for r in results:
        table.add_row(
            str(r.s),
            _fmt(r.kappa_star, ".2e"),
            _fmt(r.residual_star),
            _fmt(r.fitted_rate),
            _fmt(r.bounds.theoretical_linear_rate if r.bounds else None),
            _fmt(r.fitted_order, ".2f"),
            _fmt(r.quadratic_order, ".2f")
        )

    console.print(table)


def _show_property(report: PropertyReport):
    """Display property suite outcome."""
    table = Table(title=f"Property: {report.name}")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", justify="right", style="green")
    table.add_row("cases", str(report.cases))
    table.add_row("violations", str(report.violations))
    table.add_row("worst", f"{report.worst_ratio:.3e}")
    if report.slopes:
        table.add_row("slopes", f"{min(report.slopes):.3f} .. {max(report.slopes):.3f}")
    console.print(table)

    for detail in report.details[:10]:
        console.print(f"[red]{detail}[/red]")


def _get_default_config():
    """Get default configuration."""
    return {
        "solver": {
            "max_iters": 100,
            "grad_tol": 1e-12,
            "step_tol": 1e-14
        },
        "retraction": {
            "max_hooi_iters": 50,
            "hooi_tol": 1e-14
        },
        "diagnostics": {
            "alpha": 0.9,
            "lipschitz_radius": 1e-3,
            "lipschitz_samples": 50,
            "taylor_steps": [1e-2, 1e-3, 1e-4, 1e-5],
            "check_configurations": 100,
            "pair_count": 1000,
            "pair_radius": 1e-3
        },
        "experiment": {
            "fd_step": 1e-6,
            "max_workers": 4,
            "bound_window": 1e-3,
            "solver": {
                "grad_tol": 1e-16
            }
        },
        "output": {
            "write_report": True,
            "write_decompositions": True
        },
        "logging": {
            "level": "INFO"
        }
    }


def main():
    """Main entry point."""
    cli()


if __name__ == "__main__":
    main()
