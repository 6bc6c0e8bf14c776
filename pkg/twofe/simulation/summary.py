"""Monte Carlo summary statistics and the simulation report."""

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from twofe.config import settings
from twofe.errors import InvalidSpec
from twofe.estimation.correction import normal_quantile


@dataclass
class SummaryRow:
    """Summary of one estimator for one quantity across replications.

    With `percent` set, bias, sd and rmse are percentages of |truth| and `truth` is
    the mean true value; otherwise they are in the quantity's own units. Coverage
    is a fraction.
    """

    estimator: str
    quantity: str
    bias: float
    sd: float
    rmse: float
    se_sd: float
    coverage: float
    reps: int
    truth: float
    percent: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {
            "estimator": self.estimator,
            "quantity": self.quantity,
            "bias": self.bias,
            "sd": self.sd,
            "rmse": self.rmse,
            "se_sd": self.se_sd,
            "coverage": self.coverage,
            "reps": self.reps,
            "truth": self.truth,
            "percent": self.percent,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SummaryRow":
        return cls(
            estimator=data["estimator"],
            quantity=data["quantity"],
            bias=data["bias"],
            sd=data["sd"],
            rmse=data["rmse"],
            se_sd=data["se_sd"],
            coverage=data["coverage"],
            reps=data["reps"],
            truth=data["truth"],
            percent=data.get("percent", True),
        )


def summarize(
    estimates,
    truths,
    ses,
    level: float | None = None,
    relative: bool = True,
    estimator: str = "",
    quantity: str = "",
) -> SummaryRow:
    """
    Bias, spread, RMSE, SE/SD ratio and interval coverage of one estimator.

    `truths` may be a scalar or one value per replication (average partial effects
    change with the draw). A zero mean truth cannot anchor percentages, so the row
    falls back to absolute units and clears `percent`.

    Raises:
        InvalidSpec: Fewer than two replications or misaligned inputs.
    """
    level = settings.confidence_level if level is None else level
    estimates = np.asarray(estimates, dtype=float)
    ses = np.asarray(ses, dtype=float)
    truths = np.broadcast_to(np.asarray(truths, dtype=float), estimates.shape)
    if estimates.ndim != 1 or estimates.size < 2:
        raise InvalidSpec(f"summaries need at least 2 replications, got {estimates.size}")
    if ses.shape != estimates.shape:
        raise InvalidSpec(f"{ses.size} standard errors for {estimates.size} estimates")

    bias = float(np.mean(estimates - truths))
    sd = float(np.std(estimates, ddof=1))
    rmse = float(np.sqrt(bias**2 + sd**2))
    se_sd = float(np.mean(ses) / sd) if sd > 0 else float("nan")
    coverage = float(np.mean(np.abs(estimates - truths) <= normal_quantile(level) * ses))

    truth = float(np.mean(truths))
    percent = relative and truth != 0.0
    scale = 100.0 / abs(truth) if percent else 1.0
    return SummaryRow(
        estimator=estimator,
        quantity=quantity,
        bias=bias * scale,
        sd=sd * scale,
        rmse=rmse * scale,
        se_sd=se_sd,
        coverage=coverage,
        reps=int(estimates.size),
        truth=truth,
        percent=percent,
    )


@dataclass
class BiasTermSummary:
    """Replication mean of an estimated bias term with its Monte Carlo standard error."""

    name: str
    mean: list[float]
    mc_se: list[float]

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "mean": self.mean, "mc_se": self.mc_se}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BiasTermSummary":
        return cls(name=data["name"], mean=list(data["mean"]), mc_se=list(data["mc_se"]))


@dataclass
class SimulationReport:
    """Aggregated study results. Reproducible from `design` and `seed` alone."""

    design: dict[str, Any]
    seed: int
    reps: int
    failures: int = 0
    failed_reps: list[int] = field(default_factory=list)
    confidence_level: float = 0.95
    rows: list[SummaryRow] = field(default_factory=list)
    bias_terms: list[BiasTermSummary] = field(default_factory=list)

    @property
    def completed(self) -> int:
        return self.reps - self.failures

    def row(self, estimator: str, quantity: str) -> SummaryRow:
        for row in self.rows:
            if row.estimator == estimator and row.quantity == quantity:
                return row
        raise KeyError(f"no row for estimator {estimator!r}, quantity {quantity!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "design": self.design,
            "seed": self.seed,
            "reps": self.reps,
            "failures": self.failures,
            "failed_reps": self.failed_reps,
            "confidence_level": self.confidence_level,
            "rows": [r.to_dict() for r in self.rows],
            "bias_terms": [b.to_dict() for b in self.bias_terms],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SimulationReport":
        return cls(
            design=data["design"],
            seed=data["seed"],
            reps=data["reps"],
            failures=data.get("failures", 0),
            failed_reps=list(data.get("failed_reps", [])),
            confidence_level=data.get("confidence_level", 0.95),
            rows=[SummaryRow.from_dict(r) for r in data.get("rows", [])],
            bias_terms=[BiasTermSummary.from_dict(b) for b in data.get("bias_terms", [])],
        )
