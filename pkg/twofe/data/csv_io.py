"""CSV ingestion and export of panels."""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from twofe.errors import DegeneratePanel, DuplicateCell, ParseError
from twofe.models.panel import CsvSchema, PanelDataset

logger = logging.getLogger(__name__)


def _period_order(labels: list[str]) -> list[str]:
    """Periods sort numerically when every label is a number, else lexicographically."""
    try:
        return sorted(labels, key=float)
    except ValueError:
        return sorted(labels)


def load_csv(path: str | Path, schema: CsvSchema | None = None) -> PanelDataset:
    """Read a long-format panel file.

    Units keep their order of first appearance; periods are sorted by label.
    Absent (id, time) pairs become missing cells.

    Args:
        path: CSV file with a header row.
        schema: Column names; defaults to `id,time,y` plus every other column as a regressor.

    Returns:
        The loaded panel.

    Raises:
        ParseError: File missing or unreadable, column missing, or a non-numeric field.
        DuplicateCell: Two rows with the same (id, time).
        DegeneratePanel: Fewer than 2 units or 2 periods.
    """
    schema = schema or CsvSchema()
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"input file not found: {path}")

    try:
        frame = pd.read_csv(
            path,
            dtype={schema.id: str, schema.time: str},
            keep_default_na=False,
            float_precision="round_trip",
            encoding="utf-8",
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ParseError(f"could not parse {path}: {e}") from e

    missing = [c for c in (schema.id, schema.time, schema.outcome) if c not in frame.columns]
    regressors = list(schema.regressors or [
        c for c in frame.columns if c not in (schema.id, schema.time, schema.outcome)
    ])
    missing += [c for c in regressors if c not in frame.columns]
    if missing:
        raise ParseError(f"columns missing from {path.name}: {missing}")
    if not regressors:
        raise DegeneratePanel(f"{path.name} has no regressor columns")

    values = {}
    for column in [schema.outcome, *regressors]:
        try:
            parsed = pd.to_numeric(frame[column], errors="raise").to_numpy(dtype=float)
        except (ValueError, TypeError) as e:
            raise ParseError(f"non-numeric value in column '{column}': {e}") from e
        if not np.isfinite(parsed).all():
            raise ParseError(f"column '{column}' contains missing or infinite values")
        values[column] = parsed

    keys = frame[[schema.id, schema.time]]
    duplicated = keys.duplicated()
    if duplicated.any():
        first = keys[duplicated].iloc[0]
        raise DuplicateCell(
            f"duplicate row for ({schema.id}={first[schema.id]}, {schema.time}={first[schema.time]})"
        )

    unit_ids = list(pd.unique(frame[schema.id]))
    time_ids = _period_order(list(pd.unique(frame[schema.time])))
    if len(unit_ids) < 2 or len(time_ids) < 2:
        raise DegeneratePanel(f"need at least 2 units and 2 periods, got {len(unit_ids)} x {len(time_ids)}")

    rows = pd.Index(unit_ids).get_indexer(frame[schema.id])
    cols = pd.Index(time_ids).get_indexer(frame[schema.time])

    shape = (len(unit_ids), len(time_ids))
    mask = np.zeros(shape, dtype=bool)
    y = np.zeros(shape)
    X = np.zeros((*shape, len(regressors)))
    mask[rows, cols] = True
    y[rows, cols] = values[schema.outcome]
    for k, column in enumerate(regressors):
        X[rows, cols, k] = values[column]

    dataset = PanelDataset(
        unit_ids=tuple(unit_ids),
        time_ids=tuple(time_ids),
        y=y,
        X=X,
        mask=mask,
        regressor_names=tuple(regressors),
    )
    logger.info(
        f"Loaded {path.name}: N={dataset.N}, T={dataset.T}, K={dataset.K}, "
        f"observed={dataset.n_obs}/{dataset.N * dataset.T}"
    )
    return dataset


def write_csv(dataset: PanelDataset, path: str | Path, schema: CsvSchema | None = None) -> Path:
    """Write the observed cells in long format, unit-major order."""
    schema = schema or CsvSchema()
    regressors = list(schema.regressors or dataset.regressor_names)
    rows, cols = np.nonzero(dataset.mask)

    frame = pd.DataFrame({
        schema.id: [dataset.unit_ids[i] for i in rows],
        schema.time: [dataset.time_ids[t] for t in cols],
        schema.outcome: dataset.y[rows, cols],
    })
    for k, column in enumerate(regressors):
        frame[column] = dataset.X[rows, cols, k]

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, encoding="utf-8")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path
