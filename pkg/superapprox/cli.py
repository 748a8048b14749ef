"""superapprox CLI - reproducible super-approximation experiments."""

from pathlib import Path
from typing import Any, Optional

import typer
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from .contracts import ExperimentConfig, OutputFormat, build_config, load_experiment_config
from .errors import ConfigurationError, SuperApproxError, ValidationError
from .observability import configure_logging
from .pipeline import ExperimentRunner, RunOutcome
from .spectral import DEFAULT_SEED

app = typer.Typer(
    name="superapprox",
    help="Congruence quotients, spectral gaps, tree regularization and p-adic open images.",
    add_completion=False,
)
console = Console(stderr=True)
configure_logging()

EXIT_INVALID = 2
EXIT_SOFT_FAILURE = 1

SeedOption = typer.Option(DEFAULT_SEED, "--seed", help="Seed for randomized steps")
OutOption = typer.Option(None, "--out", "-o", help="Output file; a .sha256 sidecar is written next to it")
FormatOption = typer.Option(OutputFormat.CSV, "--format", "-f", help="Output format")
TimingsOption = typer.Option(
    True,
    "--timings/--no-timings",
    help="Record wall time; --no-timings writes 0.0 for byte-identical reruns",
)
GensOption = typer.Option(..., "--gens", "-g", help="Generator file or preset (sl2, unipotent, ...)")
ModulusOption = typer.Option(..., "--modulus", "-q", help="Modulus, e.g. 101 or 3^2*5")
SubsetOption = typer.Option(None, "--subset", help="Subset file; defaults to the generators plus identity")


def _show_outputs(outcome: RunOutcome) -> None:
    table = Table(title=f"superapprox {outcome.command.value}")
    table.add_column("File", style="cyan")
    table.add_column("sha256", style="magenta")
    for artifact in outcome.outputs:
        table.add_row(str(artifact.path), artifact.sha256[:16])
    console.print(table)


def _execute(config: ExperimentConfig) -> None:
    runner = ExperimentRunner()
    try:
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            console=console,
            transient=True,
        ) as progress:
            progress.add_task(f"Running {config.command.value}...", total=None)
            outcome = runner.run(config)
    except (ConfigurationError, ValidationError) as exc:
        console.print(f"[red]Invalid input: {exc}[/red]")
        raise typer.Exit(EXIT_INVALID) from exc
    except SuperApproxError as exc:
        console.print(f"[red]Computation failed: {exc}[/red]")
        raise typer.Exit(EXIT_SOFT_FAILURE) from exc

    if outcome.outputs:
        _show_outputs(outcome)
    else:
        typer.echo(outcome.text, nl=False)
    if outcome.exit_code:
        console.print("[yellow]Soft failures were recorded in the output.[/yellow]")
        raise typer.Exit(outcome.exit_code)


def _dispatch(payload: dict[str, Any]) -> None:
    try:
        config = build_config({k: v for k, v in payload.items() if v is not None})
    except ConfigurationError as exc:
        console.print(f"[red]Invalid configuration: {exc}[/red]")
        raise typer.Exit(EXIT_INVALID) from exc
    _execute(config)


@app.command()
def survey(
    gens: str = GensOption,
    moduli: str = typer.Option(..., "--moduli", "-m", help="Comma-separated moduli, e.g. 3,5,7,9,25"),
    jobs: int = typer.Option(1, "--jobs", "-j", help="Worker processes for survey rows"),
    reuse_cache: bool = typer.Option(
        False, "--reuse-cache/--no-reuse-cache", help="Reuse cached survey rows"
    ),
    seed: int = SeedOption,
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = FormatOption,
    timings: bool = TimingsOption,
):
    """Spectral gap of π_q(⟨Ω⟩) for every modulus, one row each."""
    _dispatch(
        {
            "command": "survey",
            "gens": gens,
            "moduli": moduli,
            "jobs": jobs,
            "reuse_cache": reuse_cache,
            "seed": seed,
            "out": out,
            "format": fmt,
            "timings": timings,
        }
    )


@app.command()
def gap(
    gens: str = GensOption,
    modulus: str = ModulusOption,
    seed: int = SeedOption,
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = FormatOption,
    timings: bool = TimingsOption,
):
    """Spectral gap λ of a single quotient."""
    _dispatch(
        {
            "command": "gap",
            "gens": gens,
            "modulus": modulus,
            "seed": seed,
            "out": out,
            "format": fmt,
            "timings": timings,
        }
    )


@app.command()
def quotient(
    gens: str = GensOption,
    modulus: str = ModulusOption,
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = FormatOption,
):
    """Enumerate π_q(⟨Ω⟩); csv writes the Cayley edge list, json a summary."""
    _dispatch({"command": "quotient", "gens": gens, "modulus": modulus, "out": out, "format": fmt})


@app.command()
def regularize(
    leaves: Path = typer.Option(..., "--leaves", help="Leaf set file ('k=<k> n=<n>' header)"),
    epsilon: str = typer.Option(..., "--epsilon", "-e", help="Rational ε, e.g. 1/2"),
    block: bool = typer.Option(False, "--block", help="Run block regularization"),
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format", "-f", help="Output format"),
):
    """Regularize a leaf set of T_{k,n}."""
    _dispatch(
        {
            "command": "regularize",
            "leaves": leaves,
            "epsilon": epsilon,
            "block": block,
            "out": out,
            "format": fmt,
        }
    )


@app.command()
def tripling(
    gens: str = GensOption,
    modulus: str = ModulusOption,
    delta: str = typer.Option(..., "--delta", "-d", help="Rational δ"),
    walk_length: int = typer.Option(..., "--walk-length", "-l", help="Walk length"),
    epsilon: Optional[str] = typer.Option(None, "--epsilon", "-e", help="Threshold ε for tripling stats"),
    subset: Optional[Path] = SubsetOption,
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format", "-f", help="Output format"),
):
    """Evaluate the mass/length/tripling predicate on a subset."""
    _dispatch(
        {
            "command": "tripling",
            "gens": gens,
            "modulus": modulus,
            "delta": delta,
            "walk_length": walk_length,
            "epsilon": epsilon,
            "subset": subset,
            "out": out,
            "format": fmt,
        }
    )


@app.command()
def boundedgen(
    gens: str = GensOption,
    modulus: str = ModulusOption,
    level: int = typer.Option(..., "--level", help="Kernel level m"),
    products: Optional[int] = typer.Option(
        None, "--C", "-C", help="Number of products; omit to search the least C"
    ),
    subset: Optional[Path] = SubsetOption,
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format", "-f", help="Output format"),
):
    """Check G[p^m] ⊆ ∏_C A."""
    _dispatch(
        {
            "command": "boundedgen",
            "gens": gens,
            "modulus": modulus,
            "level": level,
            "C": products,
            "subset": subset,
            "out": out,
            "format": fmt,
        }
    )


@app.command()
def commfill(
    gens: str = GensOption,
    modulus: str = ModulusOption,
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format", "-f", help="Output format"),
):
    """Least t with ∏_t w(G) = [G, G]."""
    _dispatch({"command": "commfill", "gens": gens, "modulus": modulus, "out": out, "format": fmt})


@app.command()
def hensel(
    map_path: Path = typer.Option(..., "--map", help="Analytic map JSON/YAML"),
    point: str = typer.Option(..., "--point", help="Comma-separated x0"),
    target: str = typer.Option(..., "--target", help="Comma-separated y"),
    lift: int = typer.Option(..., "--l", help="Level l of the ball x0 + p^l O"),
    k0: int = typer.Option(0, "--k0", help="Valuation bound k0 on N(dF(x0))"),
    precision: int = typer.Option(..., "--precision", "-M", help="Truncation M"),
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format", "-f", help="Output format"),
):
    """Solve F(x) = F(x0) + p^(l+k0) y by Hensel iteration."""
    _dispatch(
        {
            "command": "hensel",
            "map": map_path,
            "point": point,
            "target": target,
            "l": lift,
            "k0": k0,
            "precision": precision,
            "out": out,
            "format": fmt,
        }
    )


@app.command()
def sumset(
    map_path: Path = typer.Option(..., "--map", help="Analytic map JSON/YAML"),
    lift: int = typer.Option(..., "--l", help="Level l of the domain p^l O"),
    products: Optional[int] = typer.Option(
        None, "--C", "-C", help="Number of summands; omit to search the least C"
    ),
    precision: int = typer.Option(..., "--precision", "-M", help="Truncation M"),
    method: str = typer.Option("fft", "--method", help="Difference-set path: fft or sorted"),
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format", "-f", help="Output format"),
):
    """Least e with span(F) ∩ p^e O inside the C-fold difference set, or the least C."""
    _dispatch(
        {
            "command": "sumset",
            "map": map_path,
            "l": lift,
            "C": products,
            "precision": precision,
            "method": method,
            "out": out,
            "format": fmt,
        }
    )


@app.command()
def equidist(
    gens: str = GensOption,
    modulus: str = ModulusOption,
    walk_length: int = typer.Option(..., "--walk-length", "-l", help="Largest walk length"),
    functions: int = typer.Option(100, "--functions", help="Random test functions"),
    seed: int = SeedOption,
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format", "-f", help="Output format"),
):
    """Check the weighted equidistribution inequality on random functions."""
    _dispatch(
        {
            "command": "equidist",
            "gens": gens,
            "modulus": modulus,
            "walk_length": walk_length,
            "functions": functions,
            "seed": seed,
            "out": out,
            "format": fmt,
        }
    )


@app.command()
def run(
    config: Path = typer.Option(..., "--config", "-c", help="Experiment YAML or JSON"),
):
    """Run an experiment described by a config file."""
    try:
        experiment = load_experiment_config(config)
    except ConfigurationError as exc:
        console.print(f"[red]Invalid configuration: {exc}[/red]")
        raise typer.Exit(EXIT_INVALID) from exc
    _execute(experiment)


@app.command()
def version():
    """Show version information."""
    from . import __version__

    console.print(f"[blue]superapprox v{__version__}[/blue]")


if __name__ == "__main__":
    app()
