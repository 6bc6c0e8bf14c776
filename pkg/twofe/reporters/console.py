"""Console reporter for estimates, studies, oracle tables and homogeneity tests."""

from io import StringIO

from pydantic import BaseModel
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from twofe.models.documents import (
    EstimateDocument,
    HomogeneityDocument,
    OracleDocument,
    StudyDocument,
)


def _fmt(value: float | None, digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


class ConsoleReporter:
    """Reports output documents to the console as aligned tables."""

    def __init__(self, console: Console | None = None):
        self.console = console or Console()

    def report(self, document: BaseModel) -> None:
        """Print any output document."""
        match document:
            case EstimateDocument():
                self._print_estimate(document)
            case StudyDocument():
                self._print_study(document)
            case OracleDocument():
                self._print_oracle(document)
            case HomogeneityDocument():
                self._print_homogeneity(document)
            case _:
                raise TypeError(f"no console layout for {type(document).__name__}")

    @classmethod
    def to_text(cls, document: BaseModel, width: int = 120) -> str:
        """Render a document as a plain aligned-column text table."""
        buffer = StringIO()
        console = Console(file=buffer, color_system=None, width=width, force_terminal=False)
        cls(console).report(document)
        return buffer.getvalue()

    def _print_estimate(self, doc: EstimateDocument) -> None:
        diag = doc.diagnostics
        status = "[green]converged[/green]" if diag.converged else "[red]not converged[/red]"
        self.console.print(Panel.fit(
            f"[bold]{doc.family}[/bold] fixed effects, N={diag.N}, T={diag.T}, n={diag.n_obs}\n"
            f"{status} in {diag.iterations} iterations, gradient norm {_fmt(diag.gradient_norm, 2)}",
            title="Estimate",
            border_style="blue",
        ))

        table = Table(show_header=True, header_style="bold")
        table.add_column("Regressor", style="cyan")
        table.add_column("beta_hat", justify="right")
        table.add_column("se", justify="right")
        if doc.beta_tilde_A is not None:
            table.add_column("beta_tilde_A", justify="right")
            table.add_column(f"{doc.confidence_level:.0%} CI", justify="right")
        if doc.beta_tilde_J is not None:
            table.add_column("beta_tilde_J", justify="right")
        for k, name in enumerate(doc.regressors):
            row = [name, _fmt(doc.beta_hat[k]), _fmt(doc.se[k])]
            if doc.beta_tilde_A is not None:
                row += [
                    _fmt(doc.beta_tilde_A[k]),
                    f"[{_fmt(doc.ci_lower[k])}, {_fmt(doc.ci_upper[k])}]",
                ]
            if doc.beta_tilde_J is not None:
                row.append(_fmt(doc.beta_tilde_J[k]))
            table.add_row(*row)
        self.console.print(table)

        if doc.apes:
            apes = Table(show_header=True, header_style="bold dim", title="Average partial effects")
            apes.add_column("Effect", style="cyan")
            apes.add_column("delta_hat", justify="right")
            apes.add_column("se", justify="right")
            apes.add_column("delta_tilde_A", justify="right")
            apes.add_column("delta_tilde_J", justify="right")
            for ape in doc.apes:
                apes.add_row(
                    ape.spec,
                    _fmt(ape.delta_hat),
                    _fmt(ape.se),
                    _fmt(ape.delta_tilde_A),
                    _fmt(ape.delta_tilde_J),
                )
            self.console.print(apes)

    def _print_study(self, doc: StudyDocument) -> None:
        design = doc.design
        self.console.print(Panel.fit(
            f"[bold]{design.get('kind')}[/bold] N={design.get('N')}, T={design.get('T')}\n"
            f"{doc.reps} replications, {doc.failures} failed, seed {doc.seed}",
            title="Simulation study",
            border_style="blue" if doc.failures == 0 else "yellow",
        ))

        table = Table(show_header=True, header_style="bold")
        table.add_column("Quantity", style="cyan")
        table.add_column("Estimator")
        table.add_column("Bias", justify="right")
        table.add_column("SD", justify="right")
        table.add_column("RMSE", justify="right")
        table.add_column("SE/SD", justify="right")
        table.add_column(f"Coverage {doc.confidence_level:.2f}", justify="right")
        for quantity in dict.fromkeys(r.quantity for r in doc.rows):
            for row in (r for r in doc.rows if r.quantity == quantity):
                unit = "" if row.percent else " (abs)"
                table.add_row(
                    quantity,
                    row.estimator,
                    _fmt(row.bias, 2) + unit,
                    _fmt(row.sd, 2),
                    _fmt(row.rmse, 2),
                    _fmt(row.se_sd, 2),
                    _fmt(row.coverage, 2),
                )
        self.console.print(table)

        for term in doc.bias_terms:
            values = ", ".join(f"{_fmt(m)} ({_fmt(s)})" for m, s in zip(term.mean, term.mc_se, strict=True))
            self.console.print(f"[dim]{term.name} mean (MC se): {values}[/dim]")

    def _print_oracle(self, doc: OracleDocument) -> None:
        cells = list(dict.fromkeys((r.N, r.T) for r in doc.rows))
        estimators = list(dict.fromkeys((r.estimator, r.source) for r in doc.rows))
        lookup = {(r.estimator, r.source, r.N, r.T): r for r in doc.rows}

        for title, attribute in (("Bias", "bias"), ("SD", "sd"), (f"Coverage ({doc.confidence_level:.2f})", "coverage")):
            table = Table(show_header=True, header_style="bold", title=f"Neyman-Scott {title}, relative to the true variance")
            table.add_column("Estimator", style="cyan")
            for N, T in cells:
                table.add_column(f"N={N}, T={T}", justify="right")
            for estimator, source in estimators:
                values = []
                for N, T in cells:
                    row = lookup.get((estimator, source, N, T))
                    values.append(_fmt(getattr(row, attribute), 2) if row is not None else "")
                label = estimator if source == "analytic" else f"{estimator} (sim)"
                table.add_row(label, *values)
            self.console.print(table)

    def _print_homogeneity(self, doc: HomogeneityDocument) -> None:
        color = "red" if doc.p_value is not None and doc.p_value < 0.05 else "green"
        table = Table(show_header=True, header_style="bold", title=f"Homogeneity test ({doc.axis})")
        table.add_column("Metric", style="cyan")
        table.add_column("Value", justify="right")
        table.add_row("Wald statistic", _fmt(doc.statistic))
        table.add_row("Degrees of freedom", str(doc.dof))
        table.add_row("p-value", f"[{color}]{_fmt(doc.p_value)}[/{color}]")
        for h, estimates in enumerate(doc.estimates, start=1):
            table.add_row(f"beta half {h}", ", ".join(_fmt(v) for v in estimates))
        self.console.print(table)
