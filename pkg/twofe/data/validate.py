"""Panel diagnostics run before estimation."""

import logging

import numpy as np

from twofe.errors import DegenerateProjection
from twofe.families.base import LikelihoodFamily
from twofe.models.panel import PanelDataset, PanelDiagnostics

logger = logging.getLogger(__name__)

# Within variation below this share of the raw variation counts as collinear
COLLINEAR_RATIO = 1e-10


def within_variation(dataset: PanelDataset) -> list[tuple[float, bool]]:
    """Per regressor: mean square after two-way demeaning on observed cells, and whether
    that is small enough to count as collinear with the effects."""
    from twofe.estimation.projection import project

    mask = dataset.mask
    weights = mask.astype(float)
    out = []
    for k in range(dataset.K):
        column = dataset.X[..., k]
        try:
            residuals = project(weights, column, mask=mask).residuals
        except DegenerateProjection:
            residuals = np.zeros_like(column)
        within = float((residuals**2).sum() / dataset.n_obs)
        raw = float((column**2).sum() / dataset.n_obs)
        out.append((within, within <= COLLINEAR_RATIO * max(raw, 1.0)))
    return out


def collinear_regressors(dataset: PanelDataset) -> list[str]:
    return [
        name
        for name, (_, collinear) in zip(dataset.regressor_names, within_variation(dataset), strict=True)
        if collinear
    ]


def validate(dataset: PanelDataset, family: LikelihoodFamily | None = None) -> PanelDiagnostics:
    """Report within variation, separation risk and missingness. Never raises.

    Within variation of a regressor is the mean square of its residual after two-way
    demeaning on observed cells. Outcome groups are checked with `family`'s rule when
    one is given, otherwise with the binary (all-zero/all-one) rule.
    """
    mask = dataset.mask
    n_obs = dataset.n_obs
    report = PanelDiagnostics(
        N=dataset.N,
        T=dataset.T,
        K=dataset.K,
        n_obs=n_obs,
        missing_fraction=1.0 - n_obs / (dataset.N * dataset.T),
    )

    for name, (within, collinear) in zip(dataset.regressor_names, within_variation(dataset), strict=True):
        report.within_variation.append(within)
        if collinear:
            report.collinear.append(name)
            report.flags.append(f"regressor '{name}' has no variation beyond the effects")

    if family is not None:
        units = family.degenerate_groups(dataset.y, mask, axis=1)
        periods = family.degenerate_groups(dataset.y, mask, axis=0)
    else:
        totals = [np.where(mask, dataset.y, 0.0).sum(axis=a) for a in (1, 0)]
        counts = [mask.sum(axis=a) for a in (1, 0)]
        units, periods = ((t == 0) | (t == c) for t, c in zip(totals, counts, strict=True))
    report.constant_outcome_units = int(units.sum())
    report.constant_outcome_periods = int(periods.sum())
    if report.constant_outcome_units:
        report.flags.append(f"{report.constant_outcome_units} units have constant outcomes (separation risk)")
    if report.constant_outcome_periods:
        report.flags.append(f"{report.constant_outcome_periods} periods have constant outcomes (separation risk)")
    if report.missing_fraction > 0:
        report.flags.append(f"{report.missing_fraction:.1%} of cells are missing")

    for flag in report.flags:
        logger.warning(flag)
    return report
