"""Monte Carlo study orchestration.

Each replication draws a panel, fits it, applies the requested corrections and
records (estimate, truth, standard error) per estimator and quantity. Standard
errors always come from the uncorrected plug-in estimates. Replications run on a
thread pool and are aggregated in replication order.
"""

import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn

from twofe.classes.enum import StrEnum
from twofe.config import settings
from twofe.data.subpanel import drop_degenerate
from twofe.errors import DataError, EstimationError, InvalidSpec, StudyUnreliable
from twofe.estimation.ape import effects_at
from twofe.estimation.correction import analytical_correct, ape_correction
from twofe.estimation.jackknife import JackknifeOptions, split_panel_jackknife
from twofe.estimation.solver import FitOptions, fit
from twofe.families import get_family
from twofe.families.effects import PartialEffectSpec
from twofe.models.results import ParameterState, VarianceMode
from twofe.simulation.dgp import DgpKind, DgpSpec, generate
from twofe.simulation.oracle import neyman_scott_estimates
from twofe.simulation.summary import BiasTermSummary, SimulationReport, summarize

logger = logging.getLogger(__name__)

console = Console(stderr=True)

NEYMAN_SCOTT_QUANTITY = "variance"


class EstimatorKind(StrEnum):
    FE = "fe"
    ANALYTICAL = "analytical"
    JACKKNIFE = "jackknife"


@dataclass(frozen=True)
class EstimatorSpec:
    """An estimator in a study; `trim` applies to the analytical correction only."""

    kind: EstimatorKind
    trim: int | None = None

    @property
    def label(self) -> str:
        match self.kind:
            case EstimatorKind.FE:
                return "FE"
            case EstimatorKind.ANALYTICAL:
                return "Analytical" if self.trim is None else f"Analytical(L={self.trim})"
            case _:
                return "Jackknife"

    @classmethod
    def parse(cls, text: str) -> "EstimatorSpec":
        """Parse `fe`, `jackknife`, `analytical` or `analytical:L`."""
        name, _, trim = text.strip().lower().partition(":")
        try:
            kind = EstimatorKind(name)
        except ValueError as e:
            raise InvalidSpec(
                f"Unknown estimator: {name}. Available: {[k.value for k in EstimatorKind]}"
            ) from e
        if not trim:
            return cls(kind)
        if kind != EstimatorKind.ANALYTICAL or not trim.isdigit():
            raise InvalidSpec(f"invalid estimator '{text}', expected analytical:L with L >= 0")
        return cls(kind, int(trim))


@dataclass
class StudyOptions:
    """
    Options for a Monte Carlo study.

    Attributes:
        threads: Concurrent replications.
        level: Confidence level of the coverage checks.
        variance_mode: Sampling assumption behind the APE standard errors.
        no_bartlett: Use the conditional-moment bias and variance expressions.
        failure_tolerance: Largest tolerated fraction of failed replications.
        partitions: Unit half-partitions of the jackknife.
        fit: Solver options for every fit.
        progress: Show a progress spinner.
    """

    threads: int = field(default_factory=lambda: settings.threads)
    level: float = field(default_factory=lambda: settings.confidence_level)
    variance_mode: VarianceMode = VarianceMode.CONDITIONAL
    no_bartlett: bool = False
    failure_tolerance: float = field(default_factory=lambda: settings.failure_tolerance)
    partitions: int = 1
    fit: FitOptions = field(default_factory=FitOptions)
    progress: bool = True


@dataclass
class ReplicationOutcome:
    """Per-replication records keyed by (estimator label, quantity)."""

    rep: int
    records: dict[tuple[str, str], tuple[float, float, float]] = field(default_factory=dict)
    bias_terms: dict[str, np.ndarray] = field(default_factory=dict)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


class StudyRunner:
    """Runs the replications of one design and aggregates them into a report."""

    def __init__(
        self,
        dgp: DgpSpec,
        estimators: Sequence[EstimatorSpec],
        effects: Sequence[PartialEffectSpec],
        options: StudyOptions,
    ):
        self.dgp = dgp
        self.estimators = list(estimators)
        self.effects = [] if dgp.kind == DgpKind.NEYMAN_SCOTT else list(effects)
        self.options = options
        self.family = get_family(dgp.family)

    @property
    def base_trim(self) -> int:
        for estimator in self.estimators:
            if estimator.kind == EstimatorKind.ANALYTICAL and estimator.trim is not None:
                return estimator.trim
        return self.dgp.default_trim

    def _trim(self, estimator: EstimatorSpec) -> int:
        return self.base_trim if estimator.trim is None else estimator.trim

    def quantities(self, regressor_names: Sequence[str]) -> list[str]:
        if self.dgp.kind == DgpKind.NEYMAN_SCOTT:
            return [NEYMAN_SCOTT_QUANTITY]
        return [f"beta[{name}]" for name in regressor_names] + [
            f"ape[{spec.label}]" for spec in self.effects
        ]

    def _neyman_scott(self, rep: int) -> ReplicationOutcome:
        sim = generate(self.dgp, rep)
        d = sim.dataset
        estimates = neyman_scott_estimates(d.y)
        truth = float(sim.beta[0])
        scale = np.sqrt(2.0 / (d.N * d.T))
        names = {EstimatorKind.FE: "FE", EstimatorKind.ANALYTICAL: "A", EstimatorKind.JACKKNIFE: "J"}
        outcome = ReplicationOutcome(rep=rep)
        for estimator in self.estimators:
            value = float(estimates[names[estimator.kind]])
            outcome.records[(estimator.label, NEYMAN_SCOTT_QUANTITY)] = (value, truth, scale * value)
        return outcome

    def replicate(self, rep: int) -> ReplicationOutcome:
        """Run one replication; estimation and data failures are recorded, not raised."""
        try:
            if self.dgp.kind == DgpKind.NEYMAN_SCOTT:
                return self._neyman_scott(rep)
            return self._replicate(rep)
        except (EstimationError, DataError) as e:
            logger.warning(f"Replication {rep} dropped: {e}")
            return ReplicationOutcome(rep=rep, error=str(e))

    def _replicate(self, rep: int) -> ReplicationOutcome:
        opts = self.options
        family = self.family
        sim = generate(self.dgp, rep)
        dataset, units, periods = drop_degenerate(sim.dataset, family)
        true_state = ParameterState(sim.beta, sim.alpha[units], sim.gamma[periods])
        full = fit(dataset, family, opts.fit)

        betas = [f"beta[{name}]" for name in dataset.regressor_names]
        apes = [f"ape[{spec.label}]" for spec in self.effects]
        outcome = ReplicationOutcome(rep=rep)

        def record(label: str, names: list[str], values, truths, ses) -> None:
            for name, value, truth, se in zip(names, values, truths, ses, strict=True):
                outcome.records[(label, name)] = (float(value), float(truth), float(se))

        base = analytical_correct(full, family, self.base_trim, opts.no_bartlett, opts.level)
        outcome.bias_terms = {"B_hat": base.B_hat, "D_hat": base.D_hat}
        ape_base = ape_truth = None
        if self.effects:
            ape_truth = effects_at(dataset, family, self.effects, true_state).delta
            ape_base = ape_correction(
                full, family, self.effects, self.base_trim, opts.variance_mode, base, opts.level
            )

        for estimator in self.estimators:
            label = estimator.label
            match estimator.kind:
                case EstimatorKind.FE:
                    record(label, betas, full.beta, sim.beta, base.se)
                    if ape_base is not None:
                        record(label, apes, ape_base.delta_hat, ape_truth, ape_base.se)
                case EstimatorKind.ANALYTICAL:
                    trim = self._trim(estimator)
                    correction = base if trim == self.base_trim else analytical_correct(
                        full, family, trim, opts.no_bartlett, opts.level
                    )
                    record(label, betas, correction.beta_tilde_A, sim.beta, base.se)
                    if ape_base is not None:
                        corrected = ape_base if correction is base else ape_correction(
                            full, family, self.effects, trim, opts.variance_mode, correction, opts.level
                        )
                        record(label, apes, corrected.delta_tilde_A, ape_truth, ape_base.se)
                case EstimatorKind.JACKKNIFE:
                    jackknife = JackknifeOptions(
                        partitions=opts.partitions, seed=rep, threads=1, fit=opts.fit, drop_degenerate=True
                    )
                    beta_j, ape_j = split_panel_jackknife(dataset, family, self.effects, jackknife, full)
                    record(label, betas, beta_j.corrected, sim.beta, base.se)
                    if ape_j is not None:
                        record(label, apes, ape_j.corrected, ape_truth, ape_base.se)
        return outcome

    def _run_all(self, reps: int) -> list[ReplicationOutcome]:
        outcomes: list[ReplicationOutcome | None] = [None] * reps
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            console=console,
            disable=not self.options.progress,
        ) as progress:
            task = progress.add_task(f"Running {self.dgp.kind.value}...", total=reps)
            with ThreadPoolExecutor(max_workers=max(1, self.options.threads)) as executor:
                futures = {executor.submit(self.replicate, rep): rep for rep in range(reps)}
                for future in as_completed(futures):
                    outcomes[futures[future]] = future.result()
                    progress.advance(task)
        return outcomes

    def run(self, reps: int) -> SimulationReport:
        """
        Run `reps` replications and summarize them.

        Raises:
            InvalidSpec: reps < 2.
            StudyUnreliable: The failed share exceeds the tolerance; the exception
                carries the partial report.
        """
        if reps < 2:
            raise InvalidSpec(f"a study needs at least 2 replications, got {reps}")
        outcomes = self._run_all(reps)
        done = [o for o in outcomes if not o.failed]
        failed = [o.rep for o in outcomes if o.failed]

        report = SimulationReport(
            design={
                **self.dgp.model_dump(mode="json"),
                "estimators": [e.label for e in self.estimators],
                "effects": [s.label for s in self.effects],
            },
            seed=self.dgp.seed,
            reps=reps,
            failures=len(failed),
            failed_reps=failed,
            confidence_level=self.options.level,
        )
        if len(done) >= 2:
            self._aggregate(report, done)
        logger.info(f"Study {self.dgp.kind.value}: {len(done)} of {reps} replications completed")

        if len(failed) > self.options.failure_tolerance * reps:
            raise StudyUnreliable(
                f"{len(failed)} of {reps} replications failed "
                f"(tolerance {self.options.failure_tolerance:.0%})",
                report=report,
            )
        return report

    def _aggregate(self, report: SimulationReport, done: list[ReplicationOutcome]) -> None:
        keys = list(done[0].records)
        for estimator in self.estimators:
            for label, quantity in keys:
                if label != estimator.label:
                    continue
                values = np.array([o.records[(label, quantity)] for o in done])
                report.rows.append(summarize(
                    values[:, 0],
                    values[:, 1],
                    values[:, 2],
                    level=self.options.level,
                    estimator=label,
                    quantity=quantity,
                ))
        for name in done[0].bias_terms:
            draws = np.stack([o.bias_terms[name] for o in done])
            report.bias_terms.append(BiasTermSummary(
                name=name,
                mean=draws.mean(axis=0).tolist(),
                mc_se=(draws.std(axis=0, ddof=1) / np.sqrt(len(done))).tolist(),
            ))


def default_estimators(dgp: DgpSpec) -> list[EstimatorSpec]:
    return [
        EstimatorSpec(EstimatorKind.FE),
        EstimatorSpec(EstimatorKind.ANALYTICAL, dgp.default_trim),
        EstimatorSpec(EstimatorKind.JACKKNIFE),
    ]


def run_study(
    dgp: DgpSpec,
    estimators: Sequence[EstimatorSpec] | None = None,
    reps: int | None = None,
    seed: int | None = None,
    effects: Sequence[PartialEffectSpec] | None = None,
    options: StudyOptions | None = None,
) -> SimulationReport:
    """
    Monte Carlo study of one design.

    Args:
        dgp: Design to draw from.
        estimators: Estimators to compare; FE, the design's analytical trim and the
            jackknife by default.
        reps: Replications (settings.default_reps by default).
        seed: Overrides the design's seed.
        effects: Average partial effects to track; the design's defaults otherwise.
        options: Study options.

    Raises:
        InvalidSpec: Fewer than 2 replications, or an effect that does not fit the
            design's regressors.
        StudyUnreliable: Too many replications failed.
    """
    if seed is not None:
        dgp = dgp.model_copy(update={"seed": seed})
    reps = settings.default_reps if reps is None else reps
    estimators = list(estimators) if estimators else default_estimators(dgp)
    if effects is None:
        effects = [PartialEffectSpec.parse(text) for text in dgp.default_effects]
    runner = StudyRunner(dgp, estimators, effects, options or StudyOptions())
    logger.info(
        f"Study {dgp.kind.value}: N={dgp.N}, T={dgp.T}, reps={reps}, seed={dgp.seed}, "
        f"estimators={[e.label for e in runner.estimators]}"
    )
    return runner.run(reps)
