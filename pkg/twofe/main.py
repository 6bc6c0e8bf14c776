"""twofe CLI.

Two-way fixed effects estimation of nonlinear panel models with analytical and
split-panel jackknife bias corrections, plus the Monte Carlo studies behind them.

Usage:
    # Probit fit with analytical and jackknife corrections and one partial effect
    twofe estimate --input panel.csv --family probit --correction both --trim 1 --effect 0:binary-difference

    # Monte Carlo study of the static probit design
    twofe simulate --dgp static-probit-ar --N 52 --T 14 --reps 500 --seed 7

    # Neyman-Scott tables
    twofe oracle --N 10 --T 10

    # Do the two time halves share the same common parameters?
    twofe test --input panel.csv --family probit --axis time

    # JSON schema of every output document
    twofe schema

Exit codes: 0 success, 2 data error, 3 estimation error, 4 bad flags or
configuration, 5 unreliable study.
"""

import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any

import click
import typer
import yaml
from pydantic import BaseModel, ValidationError
from rich.console import Console
from rich.logging import RichHandler

from twofe.config import settings
from twofe.data import load_csv, validate, write_csv
from twofe.errors import InvalidSpec, StudyUnreliable, TwofeException
from twofe.estimation import (
    FitOptions,
    JackknifeOptions,
    SplitAxis,
    analytical_correct,
    ape_correction,
    fit,
    homogeneity_test,
    split_panel_jackknife,
)
from twofe.families import FamilyName, PartialEffectSpec, get_family
from twofe.helpers.encoder import CustomEncoder
from twofe.models.documents import (
    CorrectionMode,
    EstimateDocument,
    HomogeneityDocument,
    OracleDocument,
    RunConfig,
    StudyDocument,
    document_schemas,
)
from twofe.models.panel import CsvSchema
from twofe.models.results import Normalization, VarianceMode
from twofe.reporters import ConsoleReporter, JSONReporter
from twofe.simulation import (
    TABLE_CELLS,
    DgpKind,
    DgpSpec,
    EstimatorKind,
    EstimatorSpec,
    StudyOptions,
    generate,
    neyman_scott_oracle,
    run_study,
)

logger = logging.getLogger(__name__)

console = Console()
err_console = Console(stderr=True)
app = typer.Typer(
    name="twofe",
    help="Two-way fixed effects nonlinear panel estimation with bias corrections.",
    add_completion=False,
)

# exit code for flag and configuration errors caught by the parser
USAGE_EXIT_CODE = 4


@contextmanager
def _exit_on_error() -> Iterator[None]:
    """Turn package errors into their exit codes with the detail on standard error."""
    try:
        yield
    except TwofeException as e:
        logger.error(e)
        err_console.print(f"[red]{e}[/red]")
        raise typer.Exit(e.exit_code) from e


def _load_config(path: Path | None) -> RunConfig:
    """Read a YAML or JSON run configuration; a missing path means an empty one."""
    if path is None:
        return RunConfig()
    try:
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        return RunConfig.model_validate(data)
    except (OSError, yaml.YAMLError, ValidationError) as e:
        raise InvalidSpec(f"invalid configuration file {path}: {e}") from e


def _pick(flag: Any, configured: Any, default: Any) -> Any:
    """Flags override configuration values, which override defaults."""
    if flag not in (None, [], ()):
        return flag
    if configured is not None:
        return configured
    return default


def _parse_effects(texts: list[str]) -> list[PartialEffectSpec]:
    return [PartialEffectSpec.parse(text) for text in texts]


def _write(document: BaseModel, out: Path | None) -> None:
    reporter = JSONReporter()
    if out is None:
        typer.echo(reporter.to_string(document))
        return
    path = reporter.save(document, out)
    ConsoleReporter(err_console).report(document)
    err_console.print(f"[green]Saved to: {path}[/green]")


@app.callback()
def callback(
    ctx: typer.Context,
    config: Annotated[
        Path | None,
        typer.Option("--config", "-c", help="YAML or JSON run configuration file")
    ] = None,
    log_level: Annotated[
        str | None,
        typer.Option("--log-level", help="Logging level (default: TWOFE_LOG_LEVEL or INFO)")
    ] = None,
) -> None:
    """Two-way fixed effects nonlinear panel estimation with bias corrections."""
    logging.basicConfig(
        level=(log_level or settings.log_level).upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )
    ctx.ensure_object(dict)
    with _exit_on_error():
        ctx.obj["config"] = _load_config(config)


@app.command()
def estimate(
    ctx: typer.Context,
    input_path: Annotated[
        Path | None,
        typer.Option("--input", "-i", help="Long-format CSV: id,time,y,x1..xK")
    ] = None,
    family: Annotated[
        FamilyName | None,
        typer.Option("--family", "-f", help="Likelihood family")
    ] = None,
    correction: Annotated[
        CorrectionMode | None,
        typer.Option("--correction", help="Bias correction to apply")
    ] = None,
    trim: Annotated[
        int | None,
        typer.Option("--trim", "-L", help="Lags in the spectral bias sums (0 for static models)")
    ] = None,
    effects: Annotated[
        list[str] | None,
        typer.Option("--effect", "-e", help="Average partial effect k:kind (repeatable)")
    ] = None,
    variance_mode: Annotated[
        VarianceMode | None,
        typer.Option("--variance-mode", help="Sampling assumption of the APE standard errors")
    ] = None,
    normalization: Annotated[
        Normalization | None,
        typer.Option("--normalization", help="How the effect levels are pinned down")
    ] = None,
    no_bartlett: Annotated[
        bool,
        typer.Option("--no-bartlett", help="Bias and variance without information matrix equalities")
    ] = False,
    partitions: Annotated[
        int | None,
        typer.Option("--partitions", help="Random unit half-partitions of the jackknife")
    ] = None,
    seed: Annotated[
        int | None,
        typer.Option("--seed", help="Seed of the jackknife unit partitions")
    ] = None,
    threads: Annotated[
        int | None,
        typer.Option("--threads", help="Concurrent jackknife subfits (default: TWOFE_THREADS)")
    ] = None,
    level: Annotated[
        float | None,
        typer.Option("--level", help="Confidence level of the intervals")
    ] = None,
    outcome: Annotated[
        str,
        typer.Option("--outcome", help="Outcome column name")
    ] = "y",
    out: Annotated[
        Path | None,
        typer.Option("--out", "-o", help="Write the JSON document here instead of standard output")
    ] = None,
) -> None:
    """Fit a panel and report corrected estimates and average partial effects."""
    config: RunConfig = ctx.obj["config"]
    with _exit_on_error():
        source = _pick(input_path, config.input, None)
        if source is None:
            raise InvalidSpec("no input file: pass --input or set input in the configuration")
        likelihood = get_family(_pick(family, config.family, FamilyName.PROBIT))
        mode = CorrectionMode(_pick(correction, config.correction, CorrectionMode.ANALYTICAL))
        trim = _pick(trim, config.trim, 0)
        specs = _parse_effects(_pick(effects, config.effects, []))
        variance_mode = VarianceMode(_pick(variance_mode, config.variance_mode, VarianceMode.CONDITIONAL))
        level = _pick(level, config.level, settings.confidence_level)
        if not 0.0 < level < 1.0:
            raise InvalidSpec(f"confidence level must lie in (0, 1), got {level}")
        no_bartlett = no_bartlett or bool(config.no_bartlett)
        opts = FitOptions(normalization=Normalization(_pick(normalization, config.normalization, Normalization.PENALTY)))

        dataset = load_csv(source, CsvSchema(outcome=outcome))
        for spec in specs:
            spec.validate(dataset.K)
        validate(dataset, likelihood)
        logger.info(f"Loaded {source}: N={dataset.N}, T={dataset.T}, K={dataset.K}, n={dataset.n_obs}")

        full = fit(dataset, likelihood, opts)
        plug_in = analytical_correct(full, likelihood, trim, no_bartlett, level)
        ape = None
        if specs:
            ape = ape_correction(full, likelihood, specs, trim, variance_mode, plug_in, level)
        beta_j = ape_j = None
        if mode.jackknife:
            jackknife = JackknifeOptions(
                partitions=_pick(partitions, config.partitions, 1),
                seed=_pick(seed, config.seed, settings.default_seed),
                threads=_pick(threads, config.threads, settings.threads),
                fit=opts,
            )
            beta_j, ape_j = split_panel_jackknife(dataset, likelihood, specs, jackknife, full)

        document = EstimateDocument.build(full, plug_in, mode, ape, beta_j, ape_j)
        _write(document, _pick(out, config.output, None))


def _study_path(dgp: DgpSpec, out: Path | None) -> Path:
    if out is not None:
        return Path(out)
    return settings.output_dir / f"study_{dgp.kind.value}_N{dgp.N}_T{dgp.T}_seed{dgp.seed}.json"


def _save_study(document: StudyDocument, path: Path) -> None:
    JSONReporter().save(document, path)
    path.with_suffix(".txt").write_text(ConsoleReporter.to_text(document))
    err_console.print(f"[green]Report saved to: {path} and {path.with_suffix('.txt')}[/green]")


@app.command()
def simulate(
    ctx: typer.Context,
    dgp_kind: Annotated[
        DgpKind | None,
        typer.Option("--dgp", help="Data generating process")
    ] = None,
    n_units: Annotated[
        int | None,
        typer.Option("--N", help="Number of units")
    ] = None,
    n_periods: Annotated[
        int | None,
        typer.Option("--T", help="Number of periods")
    ] = None,
    reps: Annotated[
        int | None,
        typer.Option("--reps", "-R", help="Replications (default: TWOFE_DEFAULT_REPS)")
    ] = None,
    seed: Annotated[
        int | None,
        typer.Option("--seed", help="Study seed")
    ] = None,
    estimators: Annotated[
        list[str] | None,
        typer.Option("--estimator", help="fe, analytical[:L] or jackknife (repeatable)")
    ] = None,
    trim: Annotated[
        int | None,
        typer.Option("--trim", "-L", help="Trimming of the default analytical estimator")
    ] = None,
    effects: Annotated[
        list[str] | None,
        typer.Option("--effect", "-e", help="Average partial effect k:kind (repeatable)")
    ] = None,
    variance_mode: Annotated[
        VarianceMode | None,
        typer.Option("--variance-mode", help="Sampling assumption of the APE standard errors")
    ] = None,
    no_bartlett: Annotated[
        bool,
        typer.Option("--no-bartlett", help="Bias and variance without information matrix equalities")
    ] = False,
    series: Annotated[
        Path | None,
        typer.Option("--series", help="Series file (id,time,z,y) for the calibrated Poisson designs")
    ] = None,
    copies: Annotated[
        int | None,
        typer.Option("--copies", help="Replicate the calibration panel this many times")
    ] = None,
    partitions: Annotated[
        int | None,
        typer.Option("--partitions", help="Random unit half-partitions of the jackknife")
    ] = None,
    threads: Annotated[
        int | None,
        typer.Option("--threads", help="Concurrent replications (default: TWOFE_THREADS)")
    ] = None,
    level: Annotated[
        float | None,
        typer.Option("--level", help="Confidence level of the coverage checks")
    ] = None,
    dump_data: Annotated[
        Path | None,
        typer.Option("--dump-data", help="Write the replication-0 panel as CSV into this directory")
    ] = None,
    no_progress: Annotated[
        bool,
        typer.Option("--no-progress", help="Hide the progress spinner")
    ] = False,
    out: Annotated[
        Path | None,
        typer.Option("--out", "-o", help="Report JSON path; the text table goes next to it")
    ] = None,
) -> None:
    """Run a Monte Carlo study and write its report."""
    config: RunConfig = ctx.obj["config"]
    with _exit_on_error():
        base = config.dgp.model_dump(exclude_unset=True) if config.dgp is not None else {}
        overrides = {
            "kind": dgp_kind,
            "N": n_units,
            "T": n_periods,
            "seed": _pick(seed, config.seed, None),
            "series_path": series,
            "copies": copies,
        }
        try:
            dgp = DgpSpec.model_validate({**base, **{k: v for k, v in overrides.items() if v is not None}})
        except ValidationError as e:
            raise InvalidSpec(f"invalid design: {e}") from e

        if estimators or config.estimators:
            chosen = [EstimatorSpec.parse(text) for text in _pick(estimators, config.estimators, [])]
        else:
            trim = _pick(trim, config.trim, dgp.default_trim)
            chosen = [
                EstimatorSpec(EstimatorKind.FE),
                EstimatorSpec(EstimatorKind.ANALYTICAL, trim),
                EstimatorSpec(EstimatorKind.JACKKNIFE),
            ]
        effect_texts = _pick(effects, config.effects, None)
        specs = _parse_effects(effect_texts) if effect_texts is not None else None
        options = StudyOptions(
            threads=_pick(threads, config.threads, settings.threads),
            level=_pick(level, config.level, settings.confidence_level),
            variance_mode=VarianceMode(_pick(variance_mode, config.variance_mode, VarianceMode.CONDITIONAL)),
            no_bartlett=no_bartlett or bool(config.no_bartlett),
            partitions=_pick(partitions, config.partitions, 1),
            progress=not no_progress,
        )
        reps = _pick(reps, config.reps, settings.default_reps)

        if dump_data is not None:
            written = write_csv(generate(dgp, 0).dataset, Path(dump_data) / "replication_0.csv")
            err_console.print(f"[green]Replication 0 written to: {written}[/green]")

        path = _study_path(dgp, _pick(out, config.output, None))
        try:
            report = run_study(dgp, chosen, reps, effects=specs, options=options)
        except StudyUnreliable as e:
            if e.report is not None:
                _save_study(StudyDocument.from_report(e.report), path)
            raise
        document = StudyDocument.from_report(report)
        _save_study(document, path)
        ConsoleReporter(err_console).report(document)


@app.command()
def oracle(
    n_units: Annotated[
        list[int] | None,
        typer.Option("--N", help="Units of each cell (paired with --T; default: the six table cells)")
    ] = None,
    n_periods: Annotated[
        list[int] | None,
        typer.Option("--T", help="Periods of each cell")
    ] = None,
    simulate_rows: Annotated[
        bool,
        typer.Option("--simulate", help="Add simulated rows for the jackknife estimators")
    ] = False,
    reps: Annotated[
        int,
        typer.Option("--reps", "-R", help="Replications of the simulated rows")
    ] = 50_000,
    seed: Annotated[
        int | None,
        typer.Option("--seed", help="Seed of the simulated rows")
    ] = None,
    level: Annotated[
        float | None,
        typer.Option("--level", help="Confidence level")
    ] = None,
    out: Annotated[
        Path | None,
        typer.Option("--out", "-o", help="Also write the JSON document here")
    ] = None,
) -> None:
    """Print the Neyman-Scott bias, spread and coverage tables."""
    with _exit_on_error():
        n_units, n_periods = n_units or [], n_periods or []
        if len(n_units) != len(n_periods):
            raise InvalidSpec(f"--N and --T must pair up, got {len(n_units)} and {len(n_periods)}")
        cells = list(zip(n_units, n_periods, strict=True)) or list(TABLE_CELLS)
        level = settings.confidence_level if level is None else level
        rows = []
        for N, T in cells:
            rows += neyman_scott_oracle(N, T, level, simulate=simulate_rows, reps=reps, seed=seed)
        document = OracleDocument.from_rows(rows, level)
        ConsoleReporter(console).report(document)
        if out is not None:
            JSONReporter().save(document, out)
            err_console.print(f"[green]Saved to: {out}[/green]")


@app.command(name="test")
def homogeneity(
    ctx: typer.Context,
    input_path: Annotated[
        Path | None,
        typer.Option("--input", "-i", help="Long-format CSV: id,time,y,x1..xK")
    ] = None,
    family: Annotated[
        FamilyName | None,
        typer.Option("--family", "-f", help="Likelihood family")
    ] = None,
    axis: Annotated[
        SplitAxis,
        typer.Option("--axis", help="Split the panel along this axis")
    ] = SplitAxis.TIME,
    normalization: Annotated[
        Normalization | None,
        typer.Option("--normalization", help="How the effect levels are pinned down")
    ] = None,
    outcome: Annotated[
        str,
        typer.Option("--outcome", help="Outcome column name")
    ] = "y",
    out: Annotated[
        Path | None,
        typer.Option("--out", "-o", help="Write the JSON document here instead of standard output")
    ] = None,
) -> None:
    """Test that two halves of the panel share the same common parameters."""
    config: RunConfig = ctx.obj["config"]
    with _exit_on_error():
        source = _pick(input_path, config.input, None)
        if source is None:
            raise InvalidSpec("no input file: pass --input or set input in the configuration")
        name = FamilyName(_pick(family, config.family, FamilyName.PROBIT))
        opts = FitOptions(normalization=Normalization(_pick(normalization, config.normalization, Normalization.PENALTY)))
        dataset = load_csv(source, CsvSchema(outcome=outcome))
        result = homogeneity_test(dataset, get_family(name), axis, opts)
        _write(HomogeneityDocument.build(result, name.value), _pick(out, config.output, None))


@app.command()
def schema(
    out: Annotated[
        Path | None,
        typer.Option("--out", "-o", help="Write one <document>.schema.json per document into this directory")
    ] = None,
) -> None:
    """Publish the JSON schema of every output document."""
    import json

    schemas = document_schemas()
    if out is None:
        typer.echo(json.dumps(schemas, indent=2, cls=CustomEncoder))
        return
    out.mkdir(parents=True, exist_ok=True)
    for name, body in schemas.items():
        (out / f"{name}.schema.json").write_text(json.dumps(body, indent=2, cls=CustomEncoder) + "\n")
    err_console.print(f"[green]{len(schemas)} schemas written to: {out}[/green]")


def main() -> None:
    """Console entry point; parser errors exit with the configuration error code."""
    try:
        code = app(standalone_mode=False)
    except click.exceptions.UsageError as e:
        e.show(file=sys.stderr)
        sys.exit(USAGE_EXIT_CODE)
    except click.exceptions.Abort:
        err_console.print("[red]Aborted[/red]")
        sys.exit(1)
    sys.exit(code or 0)


if __name__ == "__main__":
    main()
