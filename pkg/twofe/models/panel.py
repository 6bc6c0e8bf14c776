"""Panel data containers.

A `PanelDataset` is a rectangular N x T grid of cells. Observed cells carry an
outcome and K regressors; missing cells are flagged in `mask` and their values are
zeroed at construction so no downstream sum can pick them up.

CSV layout (see `twofe.data.csv_io`):
- header row required
- columns `id,time,y,x1..xK` (names remappable through `CsvSchema`)
- one row per observed cell; missing cells are absent rows
"""

from dataclasses import dataclass, field

import numpy as np

from twofe.errors import DegeneratePanel, InvalidSpec

# Default CSV column names
DEFAULT_ID_COLUMN = "id"
DEFAULT_TIME_COLUMN = "time"
DEFAULT_OUTCOME_COLUMN = "y"


@dataclass(frozen=True)
class CsvSchema:
    """Column names for the id, time, outcome and regressor fields.

    When `regressors` is None every column other than id/time/outcome is a
    regressor, in header order.
    """

    id: str = DEFAULT_ID_COLUMN
    time: str = DEFAULT_TIME_COLUMN
    outcome: str = DEFAULT_OUTCOME_COLUMN
    regressors: tuple[str, ...] | None = None


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Immutable N x T panel with K regressors.

    Attributes:
        unit_ids: Ordered unit labels (length N).
        time_ids: Ordered period labels (length T).
        y: Outcome array, shape (N, T).
        X: Regressor array, shape (N, T, K).
        mask: Observed-cell flags, shape (N, T).
        regressor_names: Column names of the K regressors.
    """

    unit_ids: tuple[str, ...]
    time_ids: tuple[str, ...]
    y: np.ndarray
    X: np.ndarray
    mask: np.ndarray
    regressor_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 2:
            X = X[:, :, None]

        n_units, n_periods = mask.shape
        if n_units < 2 or n_periods < 2:
            raise DegeneratePanel(f"need at least 2 units and 2 periods, got N={n_units}, T={n_periods}")
        if y.shape != mask.shape or X.shape[:2] != mask.shape:
            raise InvalidSpec(f"shape mismatch: y {y.shape}, X {X.shape}, mask {mask.shape}")
        if X.shape[2] < 1:
            raise DegeneratePanel("need at least one regressor")
        if len(self.unit_ids) != n_units or len(self.time_ids) != n_periods:
            raise InvalidSpec("label counts do not match the panel shape")

        empty_units = np.flatnonzero(~mask.any(axis=1))
        empty_periods = np.flatnonzero(~mask.any(axis=0))
        if empty_units.size or empty_periods.size:
            raise DegeneratePanel(
                f"units {[self.unit_ids[i] for i in empty_units]} and periods "
                f"{[self.time_ids[t] for t in empty_periods]} have no observed cells"
            )

        y = np.where(mask, y, 0.0)
        X = np.where(mask[:, :, None], X, 0.0)
        for array in (y, X, mask):
            array.setflags(write=False)

        names = self.regressor_names or tuple(f"x{k + 1}" for k in range(X.shape[2]))
        if len(names) != X.shape[2]:
            raise InvalidSpec(f"{len(names)} regressor names for {X.shape[2]} regressors")

        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "unit_ids", tuple(str(u) for u in self.unit_ids))
        object.__setattr__(self, "time_ids", tuple(str(t) for t in self.time_ids))
        object.__setattr__(self, "regressor_names", tuple(names))

    @property
    def N(self) -> int:
        return self.mask.shape[0]

    @property
    def T(self) -> int:
        return self.mask.shape[1]

    @property
    def K(self) -> int:
        return self.X.shape[2]

    @property
    def n_obs(self) -> int:
        return int(self.mask.sum())

    @property
    def is_balanced(self) -> bool:
        return bool(self.mask.all())

    def equals(self, other: "PanelDataset") -> bool:
        """Exact equality of labels, mask and observed values."""
        return (
            self.unit_ids == other.unit_ids
            and self.time_ids == other.time_ids
            and self.regressor_names == other.regressor_names
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.X, other.X)
        )


@dataclass(frozen=True)
class SubpanelSpec:
    """Unit and period index subsets of a panel.

    Units may be any subset; periods must form a contiguous interval so that
    serial structure inside each unit survives the restriction.
    """

    unit_subset: tuple[int, ...]
    time_subset: tuple[int, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "unit_subset", tuple(int(i) for i in self.unit_subset))
        object.__setattr__(self, "time_subset", tuple(int(t) for t in self.time_subset))
        if not self.unit_subset or not self.time_subset:
            raise DegeneratePanel(f"empty subset in subpanel {self.name or '<unnamed>'}")
        if len(set(self.unit_subset)) != len(self.unit_subset):
            raise InvalidSpec("unit subset contains duplicates")
        start = self.time_subset[0]
        if self.time_subset != tuple(range(start, start + len(self.time_subset))):
            raise InvalidSpec("time subset must be a contiguous increasing interval")

    @classmethod
    def full(cls, dataset: PanelDataset) -> "SubpanelSpec":
        return cls(tuple(range(dataset.N)), tuple(range(dataset.T)), name="full")

    def check_bounds(self, dataset: PanelDataset) -> None:
        if max(self.unit_subset) >= dataset.N or min(self.unit_subset) < 0:
            raise InvalidSpec(f"unit index out of range for N={dataset.N}")
        if self.time_subset[-1] >= dataset.T or self.time_subset[0] < 0:
            raise InvalidSpec(f"time index out of range for T={dataset.T}")


@dataclass
class PanelDiagnostics:
    """Report produced by `validate()`; never raises."""

    N: int
    T: int
    K: int
    n_obs: int
    missing_fraction: float
    within_variation: list[float] = field(default_factory=list)
    collinear: list[str] = field(default_factory=list)
    constant_outcome_units: int = 0
    constant_outcome_periods: int = 0
    flags: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.flags

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "T": self.T,
            "K": self.K,
            "n_obs": self.n_obs,
            "missing_fraction": self.missing_fraction,
            "within_variation": self.within_variation,
            "collinear": self.collinear,
            "constant_outcome_units": self.constant_outcome_units,
            "constant_outcome_periods": self.constant_outcome_periods,
            "flags": self.flags,
        }
