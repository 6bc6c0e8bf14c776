"""Subpanel extraction and the half-panel partitions used by the jackknife."""

import logging
import math
from collections.abc import Sequence

import numpy as np

from twofe.errors import DegeneratePanel
from twofe.families.base import LikelihoodFamily
from twofe.models.panel import PanelDataset, SubpanelSpec

logger = logging.getLogger(__name__)


def subpanel(dataset: PanelDataset, spec: SubpanelSpec) -> PanelDataset:
    """Restrict a panel to a unit subset and a contiguous period interval.

    Raises:
        DegeneratePanel: The restriction leaves fewer than 2 units/periods, or a
            unit/period with no observed cell.
    """
    spec.check_bounds(dataset)
    units = np.asarray(spec.unit_subset)
    times = np.asarray(spec.time_subset)
    cells = np.ix_(units, times)
    return PanelDataset(
        unit_ids=tuple(dataset.unit_ids[i] for i in units),
        time_ids=tuple(dataset.time_ids[t] for t in times),
        y=dataset.y[cells],
        X=dataset.X[cells],
        mask=dataset.mask[cells],
        regressor_names=dataset.regressor_names,
    )


def split_halves(order: Sequence[int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """First ceil(n/2) and last ceil(n/2) entries; they share the middle entry when n is odd."""
    n = len(order)
    first = tuple(order[: math.ceil(n / 2)])
    second = tuple(order[n // 2:])
    return first, second


def time_halves(dataset: PanelDataset) -> tuple[SubpanelSpec, SubpanelSpec]:
    """Periods {t <= ceil(T/2)} and {t >= floor(T/2) + 1} (1-based), all units."""
    units = tuple(range(dataset.N))
    first, second = split_halves(range(dataset.T))
    return (
        SubpanelSpec(units, first, name="time-first-half"),
        SubpanelSpec(units, second, name="time-second-half"),
    )


def unit_halves(
    dataset: PanelDataset, order: Sequence[int] | None = None, label: str = "units"
) -> tuple[SubpanelSpec, SubpanelSpec]:
    """Split units in `order` (observation order by default), all periods.

    Each half lists its units in observation order.
    """
    order = list(range(dataset.N)) if order is None else [int(i) for i in order]
    periods = tuple(range(dataset.T))
    first, second = split_halves(order)
    return (
        SubpanelSpec(tuple(sorted(first)), periods, name=f"{label}-first-half"),
        SubpanelSpec(tuple(sorted(second)), periods, name=f"{label}-second-half"),
    )


def drop_degenerate(
    dataset: PanelDataset, family: LikelihoodFamily
) -> tuple[PanelDataset, np.ndarray, np.ndarray]:
    """Remove units and periods whose outcomes admit no finite effect.

    Removal repeats until no such group is left, since dropping units can leave a
    period with constant outcomes.

    Returns:
        The pruned panel and the kept unit and period indices of `dataset`.

    Raises:
        DegeneratePanel: Fewer than 2 units or periods remain.
    """
    units = np.arange(dataset.N)
    periods = np.arange(dataset.T)
    y, mask = dataset.y, dataset.mask
    while True:
        bad_units = family.degenerate_groups(y, mask, axis=1)
        bad_periods = family.degenerate_groups(y, mask, axis=0)
        if not bad_units.any() and not bad_periods.any():
            break
        units, periods = units[~bad_units], periods[~bad_periods]
        if units.size < 2 or periods.size < 2:
            raise DegeneratePanel(
                f"only {units.size} units and {periods.size} periods keep outcome variation"
            )
        cells = np.ix_(units, periods)
        y, mask = dataset.y[cells], dataset.mask[cells]
        # Cells of kept units in dropped periods may leave a unit empty
        empty = ~mask.any(axis=1)
        if empty.any():
            units = units[~empty]
            cells = np.ix_(units, periods)
            y, mask = dataset.y[cells], dataset.mask[cells]

    if units.size == dataset.N and periods.size == dataset.T:
        return dataset, units, periods
    logger.debug(f"Dropped {dataset.N - units.size} units and {dataset.T - periods.size} periods")
    cells = np.ix_(units, periods)
    pruned = PanelDataset(
        unit_ids=tuple(dataset.unit_ids[i] for i in units),
        time_ids=tuple(dataset.time_ids[t] for t in periods),
        y=dataset.y[cells],
        X=dataset.X[cells],
        mask=dataset.mask[cells],
        regressor_names=dataset.regressor_names,
    )
    return pruned, units, periods
