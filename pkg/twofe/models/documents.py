"""Pydantic output documents and the run configuration.

Every JSON document the CLI writes is one of these models; `document_schemas()`
returns the JSON schema published by `twofe schema`. Non-finite floats are
written as null.
"""

import math
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from twofe.classes.enum import StrEnum
from twofe.models.results import (
    ApeCorrectionResult,
    CorrectionResult,
    FitResult,
    HomogeneityResult,
    JackknifeResult,
    Normalization,
    VarianceMode,
)
from twofe.simulation.dgp import DgpSpec
from twofe.simulation.oracle import OracleRow
from twofe.simulation.summary import SimulationReport


class CorrectionMode(StrEnum):
    NONE = "none"
    ANALYTICAL = "analytical"
    JACKKNIFE = "jackknife"
    BOTH = "both"

    @property
    def analytical(self) -> bool:
        return self in (CorrectionMode.ANALYTICAL, CorrectionMode.BOTH)

    @property
    def jackknife(self) -> bool:
        return self in (CorrectionMode.JACKKNIFE, CorrectionMode.BOTH)


def finite(value: Any) -> float | None:
    value = float(value)
    return value if math.isfinite(value) else None


def finite_list(values: Any) -> list[float | None]:
    return [finite(v) for v in np.ravel(values)]


def finite_matrix(values: Any) -> list[list[float | None]]:
    return [finite_list(row) for row in np.atleast_2d(values)]


class FitDiagnostics(BaseModel):
    """Solver diagnostics of an estimate."""
    converged: bool
    iterations: int
    halvings: int
    gradient_norm: float | None
    loglik: float | None
    normalization: Normalization
    penalty_b: float
    trim_L: int | None = None
    N: int
    T: int
    n_obs: int


class ApeEntry(BaseModel):
    """One average partial effect."""
    spec: str
    delta_hat: float | None
    delta_tilde_A: float | None = None
    delta_tilde_J: float | None = None
    se: float | None = None
    B_delta: float | None = None
    D_delta: float | None = None


class EstimateDocument(BaseModel):
    """Result of `twofe estimate`."""
    family: str
    correction: CorrectionMode
    regressors: list[str]
    confidence_level: float
    beta_hat: list[float | None]
    beta_tilde_A: list[float | None] | None = None
    beta_tilde_J: list[float | None] | None = None
    se: list[float | None]
    vcov: list[list[float | None]]
    ci_lower: list[float | None] | None = None
    ci_upper: list[float | None] | None = None
    B_hat: list[float | None] | None = None
    D_hat: list[float | None] | None = None
    W_hat: list[list[float | None]]
    variance_mode: VarianceMode | None = None
    apes: list[ApeEntry] = []
    diagnostics: FitDiagnostics

    @classmethod
    def build(
        cls,
        fit: FitResult,
        correction: CorrectionResult,
        mode: CorrectionMode,
        ape: ApeCorrectionResult | None = None,
        jackknife: JackknifeResult | None = None,
        ape_jackknife: JackknifeResult | None = None,
    ) -> "EstimateDocument":
        """Assemble the document; `correction` is always computed for the plug-ins."""
        d = fit.dataset
        diagnostics = fit.diagnostics()
        apes = []
        if ape is not None:
            for s, spec in enumerate(ape.specs):
                apes.append(ApeEntry(
                    spec=spec.label,
                    delta_hat=finite(ape.delta_hat[s]),
                    delta_tilde_A=finite(ape.delta_tilde_A[s]) if mode.analytical else None,
                    delta_tilde_J=finite(ape_jackknife.corrected[s]) if ape_jackknife is not None else None,
                    se=finite(ape.se[s]),
                    B_delta=finite(ape.B_delta[s]) if mode.analytical else None,
                    D_delta=finite(ape.D_delta[s]) if mode.analytical else None,
                ))
        return cls(
            family=fit.family,
            correction=mode,
            regressors=list(d.regressor_names),
            confidence_level=correction.confidence_level,
            beta_hat=finite_list(fit.beta),
            beta_tilde_A=finite_list(correction.beta_tilde_A) if mode.analytical else None,
            beta_tilde_J=finite_list(jackknife.corrected) if jackknife is not None else None,
            se=finite_list(correction.se),
            vcov=finite_matrix(correction.vcov),
            ci_lower=finite_list(correction.ci_lower) if mode.analytical else None,
            ci_upper=finite_list(correction.ci_upper) if mode.analytical else None,
            B_hat=finite_list(correction.B_hat) if mode.analytical else None,
            D_hat=finite_list(correction.D_hat) if mode.analytical else None,
            W_hat=finite_matrix(correction.W_hat),
            variance_mode=ape.variance_mode if ape is not None else None,
            apes=apes,
            diagnostics=FitDiagnostics(
                converged=diagnostics["converged"],
                iterations=diagnostics["iterations"],
                halvings=diagnostics["halvings"],
                gradient_norm=finite(diagnostics["gradient_norm"]),
                loglik=finite(diagnostics["loglik"]),
                normalization=fit.state.normalization,
                penalty_b=fit.penalty_b,
                trim_L=correction.trim_L if mode.analytical else None,
                N=d.N,
                T=d.T,
                n_obs=d.n_obs,
            ),
        )


class SummaryEntry(BaseModel):
    """Summary of one estimator for one quantity."""
    estimator: str
    quantity: str
    bias: float | None
    sd: float | None
    rmse: float | None
    se_sd: float | None
    coverage: float | None
    reps: int
    truth: float | None
    percent: bool


class BiasTermEntry(BaseModel):
    """Replication mean of a bias term with its Monte Carlo standard error."""
    name: str
    mean: list[float | None]
    mc_se: list[float | None]


class StudyDocument(BaseModel):
    """Result of `twofe simulate`."""
    design: dict[str, Any]
    seed: int
    reps: int
    failures: int
    failed_reps: list[int] = []
    confidence_level: float
    rows: list[SummaryEntry]
    bias_terms: list[BiasTermEntry] = []

    @classmethod
    def from_report(cls, report: SimulationReport) -> "StudyDocument":
        return cls(
            design=report.design,
            seed=report.seed,
            reps=report.reps,
            failures=report.failures,
            failed_reps=report.failed_reps,
            confidence_level=report.confidence_level,
            rows=[
                SummaryEntry(
                    estimator=r.estimator,
                    quantity=r.quantity,
                    bias=finite(r.bias),
                    sd=finite(r.sd),
                    rmse=finite(r.rmse),
                    se_sd=finite(r.se_sd),
                    coverage=finite(r.coverage),
                    reps=r.reps,
                    truth=finite(r.truth),
                    percent=r.percent,
                )
                for r in report.rows
            ],
            bias_terms=[
                BiasTermEntry(name=b.name, mean=finite_list(b.mean), mc_se=finite_list(b.mc_se))
                for b in report.bias_terms
            ],
        )


class OracleEntry(BaseModel):
    """One Neyman-Scott estimator at one (N, T) cell, relative to the true variance."""
    estimator: str
    N: int
    T: int
    bias: float | None
    sd: float | None
    coverage: float | None
    source: str
    reps: int = 0
    mc_se: float | None = None


class OracleDocument(BaseModel):
    """Result of `twofe oracle`."""
    confidence_level: float
    rows: list[OracleEntry]

    @classmethod
    def from_rows(cls, rows: list[OracleRow], level: float) -> "OracleDocument":
        return cls(
            confidence_level=level,
            rows=[
                OracleEntry(
                    estimator=r.estimator,
                    N=r.N,
                    T=r.T,
                    bias=finite(r.bias),
                    sd=finite(r.sd),
                    coverage=finite(r.coverage),
                    source=r.source,
                    reps=r.reps,
                    mc_se=finite(r.mc_se),
                )
                for r in rows
            ],
        )


class HomogeneityDocument(BaseModel):
    """Result of `twofe test`."""
    family: str
    axis: str
    statistic: float | None
    dof: int
    p_value: float | None
    estimates: list[list[float | None]]

    @classmethod
    def build(cls, result: HomogeneityResult, family: str) -> "HomogeneityDocument":
        return cls(
            family=family,
            axis=result.axis,
            statistic=finite(result.statistic),
            dof=result.dof,
            p_value=finite(result.p_value),
            estimates=finite_matrix(result.estimates),
        )


class RunConfig(BaseModel):
    """Run configuration file (YAML or JSON). Command-line flags override its values."""

    model_config = ConfigDict(extra="forbid")

    family: str | None = None
    correction: CorrectionMode | None = None
    trim: int | None = Field(default=None, ge=0)
    effects: list[str] | None = None
    variance_mode: VarianceMode | None = None
    normalization: Normalization | None = None
    no_bartlett: bool | None = None
    seed: int | None = None
    reps: int | None = Field(default=None, ge=2)
    threads: int | None = Field(default=None, ge=1)
    partitions: int | None = Field(default=None, ge=1)
    level: float | None = Field(default=None, gt=0.0, lt=1.0)
    estimators: list[str] | None = None
    input: str | None = None
    output: str | None = None
    dgp: DgpSpec | None = None


DOCUMENTS: dict[str, type[BaseModel]] = {
    "estimate": EstimateDocument,
    "study": StudyDocument,
    "oracle": OracleDocument,
    "homogeneity": HomogeneityDocument,
    "run-config": RunConfig,
}


def document_schemas() -> dict[str, dict[str, Any]]:
    return {name: model.model_json_schema() for name, model in DOCUMENTS.items()}
