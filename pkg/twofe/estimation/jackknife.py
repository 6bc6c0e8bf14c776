"""Split-panel jackknife corrections and the homogeneity test behind them.

The full panel is refit on two time halves and on two unit halves (or on S random
unit half-partitions); the corrected estimate is
3 * full - mean(time halves) - mean(unit halves). Subfits run concurrently and are
warm-started at the full-panel solution.
"""

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from twofe.classes.enum import StrEnum
from twofe.config import settings
from twofe.data.subpanel import drop_degenerate, subpanel, time_halves, unit_halves
from twofe.errors import DataError, EstimationError, InvalidSpec, JackknifeSubfitError, SingularInformation
from twofe.estimation.ape import compute_ape
from twofe.estimation.correction import estimate_W
from twofe.estimation.solver import FitOptions, fit
from twofe.families.base import LikelihoodFamily
from twofe.families.effects import PartialEffectSpec
from twofe.models.panel import PanelDataset, SubpanelSpec
from twofe.models.results import FitResult, HomogeneityResult, JackknifeResult, ParameterState

logger = logging.getLogger(__name__)


class SplitAxis(StrEnum):
    TIME = "time"
    CROSS_SECTION = "cross-section"


@dataclass
class JackknifeOptions:
    """
    Options for the split-panel jackknife.

    Attributes:
        partitions: Number of unit half-partitions. 1 splits units in observation
            order; more draws that many random partitions and averages them.
        seed: Seed for the random partitions.
        threads: Concurrent subfits.
        fit: Solver options for every subfit.
        drop_degenerate: Remove units and periods without outcome variation from
            each half before fitting it.
    """

    partitions: int = 1
    seed: int = field(default_factory=lambda: settings.default_seed)
    threads: int = field(default_factory=lambda: settings.threads)
    fit: FitOptions = field(default_factory=FitOptions)
    drop_degenerate: bool = False


@dataclass
class _Subfits:
    full: FitResult
    time: list[FitResult]
    units: list[FitResult]
    partitions: list[tuple[tuple[int, ...], tuple[int, ...]]]


def unit_partitions(dataset: PanelDataset, partitions: int, seed: int) -> list[tuple[SubpanelSpec, SubpanelSpec]]:
    """Observation-order halves, or `partitions` random half-splits from `seed`."""
    if partitions <= 1:
        return [unit_halves(dataset)]
    rng = np.random.default_rng(seed)
    return [
        unit_halves(dataset, order=rng.permutation(dataset.N), label=f"units-{s}")
        for s in range(partitions)
    ]


def _warm_start(full: FitResult, units: np.ndarray, periods: np.ndarray) -> ParameterState:
    state = full.state
    return ParameterState(
        beta=state.beta.copy(),
        alpha=state.alpha[units].copy(),
        gamma=state.gamma[periods].copy(),
        normalization=state.normalization,
    )


def _fit_subpanel(
    dataset: PanelDataset,
    family: LikelihoodFamily,
    spec: SubpanelSpec,
    full: FitResult,
    opts: JackknifeOptions,
) -> FitResult:
    units = np.asarray(spec.unit_subset)
    periods = np.asarray(spec.time_subset)
    try:
        half = subpanel(dataset, spec)
        if opts.drop_degenerate:
            half, kept_units, kept_periods = drop_degenerate(half, family)
            units, periods = units[kept_units], periods[kept_periods]
        return fit(half, family, opts.fit, start=_warm_start(full, units, periods))
    except (EstimationError, DataError) as e:
        raise JackknifeSubfitError(f"subpanel '{spec.name}' could not be fit: {e}", subpanel=spec.name) from e


def _run_subfits(
    dataset: PanelDataset,
    family: LikelihoodFamily,
    opts: JackknifeOptions,
    full: FitResult | None,
) -> _Subfits:
    if dataset.N < 4 or dataset.T < 4:
        raise JackknifeSubfitError(
            f"split-panel jackknife needs N >= 4 and T >= 4, got N={dataset.N}, T={dataset.T}"
        )
    full = full or fit(dataset, family, opts.fit)
    time_specs = list(time_halves(dataset))
    unit_specs = [spec for pair in unit_partitions(dataset, opts.partitions, opts.seed) for spec in pair]
    specs = time_specs + unit_specs

    results: list[FitResult | None] = [None] * len(specs)
    with ThreadPoolExecutor(max_workers=max(1, opts.threads)) as executor:
        futures = {
            executor.submit(_fit_subpanel, dataset, family, spec, full, opts): index
            for index, spec in enumerate(specs)
        }
        for future in as_completed(futures):
            results[futures[future]] = future.result()

    partitions = [
        (unit_specs[2 * s].unit_subset, unit_specs[2 * s + 1].unit_subset)
        for s in range(len(unit_specs) // 2)
    ]
    logger.debug(f"Jackknife subfits done: {len(specs)} subpanels")
    return _Subfits(full=full, time=results[:2], units=results[2:], partitions=partitions)


def _combine(
    subfits: _Subfits, estimate: Callable[[FitResult], np.ndarray], seed: int | None
) -> JackknifeResult:
    full_estimate = np.asarray(estimate(subfits.full), dtype=float)
    time_estimates = np.stack([estimate(f) for f in subfits.time])
    unit_estimates = np.stack([estimate(f) for f in subfits.units])
    result = JackknifeResult(
        corrected=np.zeros_like(full_estimate),
        full_estimate=full_estimate,
        half_time_estimates=time_estimates,
        half_unit_estimates=unit_estimates,
        partitions_used=subfits.partitions,
        rng_seed=seed,
        full_fit=subfits.full,
    )
    result.corrected = result.recompute()
    return result


def split_panel_jackknife(
    dataset: PanelDataset,
    family: LikelihoodFamily,
    specs: Sequence[PartialEffectSpec] = (),
    opts: JackknifeOptions | None = None,
    full_fit: FitResult | None = None,
) -> tuple[JackknifeResult, JackknifeResult | None]:
    """
    Jackknife corrections of the common parameters and, when `specs` are given, of
    the average partial effects, from one set of subfits.

    The beta result's `se` holds the plug-in standard errors of the full-panel fit.

    Raises:
        JackknifeSubfitError: The panel is too small to split, or a subfit failed.
    """
    opts = opts or JackknifeOptions()
    for spec in specs:
        spec.validate(dataset.K)
    subfits = _run_subfits(dataset, family, opts, full_fit)
    seed = opts.seed if opts.partitions > 1 else None

    beta_result = _combine(subfits, lambda f: f.beta, seed)
    W = estimate_W(subfits.full, family)
    beta_result.se = np.sqrt(np.diag(np.linalg.inv(W)) / subfits.full.dataset.n_obs)
    logger.info(f"Jackknife: beta_hat={beta_result.full_estimate}, beta_tilde_J={beta_result.corrected}")

    ape_result = None
    if specs:
        # each half's effects are averaged over that half's own fit
        ape_result = _combine(subfits, lambda f: compute_ape(f, family, specs).delta, seed)
        logger.info(f"Jackknife APE: delta_hat={ape_result.full_estimate}, delta_tilde_J={ape_result.corrected}")
    return beta_result, ape_result


def spj_beta(
    dataset: PanelDataset,
    family: LikelihoodFamily,
    opts: JackknifeOptions | None = None,
    full_fit: FitResult | None = None,
) -> JackknifeResult:
    """Split-panel jackknife correction of the common parameters."""
    return split_panel_jackknife(dataset, family, (), opts, full_fit)[0]


def spj_ape(
    dataset: PanelDataset,
    family: LikelihoodFamily,
    specs: Sequence[PartialEffectSpec],
    opts: JackknifeOptions | None = None,
    full_fit: FitResult | None = None,
) -> JackknifeResult:
    """Split-panel jackknife correction of average partial effects."""
    if not specs:
        raise InvalidSpec("no partial effect requested")
    return split_panel_jackknife(dataset, family, specs, opts, full_fit)[1]


def wald_statistic(first: FitResult, second: FitResult, family: LikelihoodFamily) -> tuple[float, int, float]:
    """
    Wald statistic for equal common parameters in two independent fits.

    Returns:
        (statistic, degrees of freedom, p-value)

    Raises:
        SingularInformation: The summed variance cannot be inverted.
    """
    difference = first.beta - second.beta
    variance = sum(
        np.linalg.inv(estimate_W(f, family)) / f.dataset.n_obs for f in (first, second)
    )
    try:
        statistic = float(difference @ np.linalg.solve(variance, difference))
    except np.linalg.LinAlgError as e:
        raise SingularInformation("combined variance of the two halves is singular") from e
    dof = difference.size
    return statistic, dof, float(chi2.sf(statistic, dof))


def homogeneity_test(
    dataset: PanelDataset,
    family: LikelihoodFamily,
    axis: SplitAxis = SplitAxis.TIME,
    opts: FitOptions | None = None,
) -> HomogeneityResult:
    """Chow-type test that the two halves along `axis` share the same common parameters.

    On the time axis the halves share one period when T is odd; that overlap is
    ignored.
    """
    opts = opts or FitOptions()
    halves = time_halves(dataset) if axis == SplitAxis.TIME else unit_halves(dataset)
    fits = []
    for spec in halves:
        try:
            fits.append(fit(subpanel(dataset, spec), family, opts))
        except (EstimationError, DataError) as e:
            raise JackknifeSubfitError(f"subpanel '{spec.name}' could not be fit: {e}", subpanel=spec.name) from e
    statistic, dof, p_value = wald_statistic(fits[0], fits[1], family)
    logger.info(f"Homogeneity test ({axis.value}): W={statistic:.4f}, dof={dof}, p={p_value:.4f}")
    return HomogeneityResult(
        axis=axis.value,
        statistic=statistic,
        dof=dof,
        p_value=p_value,
        estimates=np.stack([f.beta for f in fits]),
    )
