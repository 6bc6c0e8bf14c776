"""Data generating processes for the Monte Carlo studies.

Every design draws from `numpy.random.default_rng([seed, rep])`, so a replication
depends only on (seed, rep) and never on which thread runs it.

Static probit designs:
    alpha_i, gamma_t ~ N(0, 1/16), eps_it ~ N(0, 1), Y_it = 1{X_it beta + alpha_i + gamma_t > eps_it}
    ar:    X_it = X_i,t-1 / 2 + alpha_i + gamma_t + v_it, v_it ~ N(0, 1/2), X_i0 ~ N(0, 1)
    trend: X_it = 2t/T + alpha_i + gamma_t + v_it, v_it ~ N(0, 3/4)

Dynamic probit designs use regressors (Y_i,t-1, Z_it) with (beta_Y, beta_Z) = (0.5, 1)
and an initial period t = 0; Z follows the static laws with a 1.5t/T trend slope.
"""

import logging
from functools import lru_cache
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from twofe.classes.enum import StrEnum
from twofe.errors import InvalidSpec
from twofe.families import FamilyName
from twofe.models.panel import CsvSchema, PanelDataset

logger = logging.getLogger(__name__)


class DgpKind(StrEnum):
    NEYMAN_SCOTT = "neyman-scott"
    STATIC_PROBIT_AR = "static-probit-ar"
    STATIC_PROBIT_TREND = "static-probit-trend"
    DYNAMIC_PROBIT_AR = "dynamic-probit-ar"
    DYNAMIC_PROBIT_TREND = "dynamic-probit-trend"
    LINEAR_AR = "linear-ar"
    STATIC_POISSON_AR = "static-poisson-ar"
    CALIBRATED_POISSON_STATIC = "calibrated-poisson-static"
    CALIBRATED_POISSON_DYNAMIC = "calibrated-poisson-dynamic"


# kind -> (family, true beta, default effects, default trim)
_DESIGNS: dict[DgpKind, tuple[FamilyName, list[float], list[str], int]] = {
    DgpKind.NEYMAN_SCOTT: (FamilyName.GAUSSIAN, [1.0], [], 0),
    DgpKind.STATIC_PROBIT_AR: (FamilyName.PROBIT, [1.0], ["0:continuous-derivative"], 0),
    DgpKind.STATIC_PROBIT_TREND: (FamilyName.PROBIT, [1.0], ["0:continuous-derivative"], 0),
    DgpKind.DYNAMIC_PROBIT_AR: (
        FamilyName.PROBIT, [0.5, 1.0], ["0:binary-difference", "1:continuous-derivative"], 1
    ),
    DgpKind.DYNAMIC_PROBIT_TREND: (
        FamilyName.PROBIT, [0.5, 1.0], ["0:binary-difference", "1:continuous-derivative"], 1
    ),
    DgpKind.LINEAR_AR: (FamilyName.GAUSSIAN, [1.0], ["0:continuous-derivative"], 0),
    DgpKind.STATIC_POISSON_AR: (FamilyName.POISSON, [1.0], ["0:continuous-derivative"], 0),
    DgpKind.CALIBRATED_POISSON_STATIC: (FamilyName.POISSON, [], ["0:poisson-transform:1:square"], 0),
    DgpKind.CALIBRATED_POISSON_DYNAMIC: (
        FamilyName.POISSON,
        [],
        ["0:poisson-transform:0:log1p:nolinear", "1:poisson-transform:2:square"],
        1,
    ),
}

CALIBRATED_KINDS = (DgpKind.CALIBRATED_POISSON_STATIC, DgpKind.CALIBRATED_POISSON_DYNAMIC)


class DgpSpec(BaseModel):
    """Study design. Unset `beta` takes the design's true values.

    For the Neyman-Scott design `beta` holds the error variance. Calibrated designs
    take N and T from the series file (N times `copies`).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: DgpKind = DgpKind.STATIC_PROBIT_AR
    N: int = Field(default=52, ge=2)
    T: int = Field(default=14, ge=2)
    beta: list[float] | None = None
    sigma_alpha: float = Field(default=0.25, ge=0.0)
    sigma_gamma: float = Field(default=0.25, ge=0.0)
    seed: int = 0
    series_path: Path | None = None
    copies: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_design(self) -> "DgpSpec":
        if self.kind in CALIBRATED_KINDS and self.series_path is None:
            raise ValueError(f"{self.kind.value} needs series_path (columns id,time,z,y)")
        expected = len(_DESIGNS[self.kind][1])
        if self.beta is not None and expected and len(self.beta) != expected:
            raise ValueError(f"{self.kind.value} takes {expected} coefficients, got {len(self.beta)}")
        return self

    @property
    def family(self) -> FamilyName:
        return _DESIGNS[self.kind][0]

    @property
    def default_effects(self) -> list[str]:
        return list(_DESIGNS[self.kind][2])

    @property
    def default_trim(self) -> int:
        return _DESIGNS[self.kind][3]

    @property
    def is_calibrated(self) -> bool:
        return self.kind in CALIBRATED_KINDS

    def true_beta(self) -> np.ndarray:
        if self.beta is not None:
            return np.asarray(self.beta, dtype=float)
        if self.is_calibrated:
            return _calibration(str(self.series_path), self.kind == DgpKind.CALIBRATED_POISSON_DYNAMIC)[0]
        return np.asarray(_DESIGNS[self.kind][1], dtype=float)


class SimulatedPanel:
    """A generated panel with the parameters that produced it."""

    def __init__(
        self,
        dataset: PanelDataset,
        beta: np.ndarray,
        alpha: np.ndarray,
        gamma: np.ndarray,
        family: FamilyName,
    ):
        self.dataset = dataset
        self.beta = beta
        self.alpha = alpha
        self.gamma = gamma
        self.family = family


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng([seed, rep])


def _panel(y: np.ndarray, X: np.ndarray, names: tuple[str, ...]) -> PanelDataset:
    n_units, n_periods = y.shape
    return PanelDataset(
        unit_ids=tuple(str(i + 1) for i in range(n_units)),
        time_ids=tuple(str(t + 1) for t in range(n_periods)),
        y=y,
        X=X,
        mask=np.ones(y.shape, dtype=bool),
        regressor_names=names,
    )


def _static_regressor(
    rng: np.random.Generator, alpha: np.ndarray, gamma: np.ndarray, trend: bool, slope: float
) -> np.ndarray:
    n_units, n_periods = alpha.size, gamma.size
    if trend:
        t = np.arange(1, n_periods + 1)
        noise = rng.normal(0.0, np.sqrt(0.75), (n_units, n_periods))
        return slope * t[None, :] / n_periods + alpha[:, None] + gamma[None, :] + noise
    x = np.empty((n_units, n_periods))
    previous = rng.normal(0.0, 1.0, n_units)
    noise = rng.normal(0.0, np.sqrt(0.5), (n_units, n_periods))
    for t in range(n_periods):
        previous = previous / 2.0 + alpha + gamma[t] + noise[:, t]
        x[:, t] = previous
    return x


def _static_design(spec: DgpSpec, rng: np.random.Generator) -> SimulatedPanel:
    beta = spec.true_beta()
    alpha = rng.normal(0.0, spec.sigma_alpha, spec.N)
    gamma = rng.normal(0.0, spec.sigma_gamma, spec.T)
    trend = spec.kind == DgpKind.STATIC_PROBIT_TREND
    x = _static_regressor(rng, alpha, gamma, trend, slope=2.0)
    index = x * beta[0] + alpha[:, None] + gamma[None, :]

    match spec.kind:
        case DgpKind.LINEAR_AR:
            y = index + rng.normal(0.0, 1.0, index.shape)
        case DgpKind.STATIC_POISSON_AR:
            y = rng.poisson(np.exp(index)).astype(float)
        case _:
            y = (index > rng.normal(0.0, 1.0, index.shape)).astype(float)
    return SimulatedPanel(_panel(y, x[..., None], ("x",)), beta, alpha, gamma, spec.family)


def _dynamic_design(spec: DgpSpec, rng: np.random.Generator) -> SimulatedPanel:
    beta_y, beta_z = spec.true_beta()
    n_units, n_periods = spec.N, spec.T
    alpha = rng.normal(0.0, spec.sigma_alpha, n_units)
    gamma = rng.normal(0.0, spec.sigma_gamma, n_periods + 1)
    trend = spec.kind == DgpKind.DYNAMIC_PROBIT_TREND

    if trend:
        z0 = alpha + gamma[0] + rng.normal(0.0, np.sqrt(0.75), n_units)
    else:
        z0 = rng.normal(0.0, 1.0, n_units)
    y_prev = (beta_z * z0 + alpha + gamma[0] > rng.normal(0.0, 1.0, n_units)).astype(float)

    z = _static_regressor(rng, alpha, gamma[1:], trend, slope=1.5) if trend else None
    noise = rng.normal(0.0, np.sqrt(0.5), (n_units, n_periods)) if not trend else None
    eps = rng.normal(0.0, 1.0, (n_units, n_periods))

    y = np.empty((n_units, n_periods))
    X = np.empty((n_units, n_periods, 2))
    z_prev = z0
    for t in range(n_periods):
        z_t = z[:, t] if trend else z_prev / 2.0 + alpha + gamma[t + 1] + noise[:, t]
        X[:, t, 0] = y_prev
        X[:, t, 1] = z_t
        y[:, t] = (beta_y * y_prev + beta_z * z_t + alpha + gamma[t + 1] > eps[:, t]).astype(float)
        y_prev = y[:, t]
        z_prev = z_t
    return SimulatedPanel(
        _panel(y, X, ("y_lag", "z")), np.array([beta_y, beta_z]), alpha, gamma[1:], spec.family
    )


def _neyman_scott(spec: DgpSpec, rng: np.random.Generator) -> SimulatedPanel:
    variance = spec.true_beta()
    alpha = rng.normal(0.0, spec.sigma_alpha, spec.N)
    gamma = rng.normal(0.0, spec.sigma_gamma, spec.T)
    eps = rng.normal(0.0, np.sqrt(variance[0]), (spec.N, spec.T))
    y = alpha[:, None] + gamma[None, :] + eps
    # auxiliary regressor; the design has no common slope
    x = rng.normal(0.0, 1.0, (spec.N, spec.T))
    return SimulatedPanel(_panel(y, x[..., None], ("x",)), variance, alpha, gamma, spec.family)


@lru_cache(maxsize=8)
def _calibration(path: str, dynamic: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Fixed effects Poisson fit on a series file: (beta, alpha, gamma, z, y0)."""
    from twofe.data.csv_io import load_csv
    from twofe.estimation.solver import fit
    from twofe.families.poisson import PoissonFamily

    source = load_csv(path, CsvSchema(outcome="y", regressors=("z",)))
    if not source.is_balanced:
        raise InvalidSpec(f"calibrated designs need a balanced series file, {path} has missing cells")
    z = source.X[..., 0]
    y = source.y
    if dynamic:
        X = np.stack([np.log1p(y[:, :-1]), z[:, 1:], z[:, 1:] ** 2], axis=-1)
        outcome, periods, z_used, y0 = y[:, 1:], source.time_ids[1:], z[:, 1:], y[:, 0]
    else:
        X = np.stack([z, z**2], axis=-1)
        outcome, periods, z_used, y0 = y, source.time_ids, z, np.zeros(source.N)

    panel = PanelDataset(source.unit_ids, periods, outcome, X, np.ones(outcome.shape, dtype=bool))
    calibrated = fit(panel, PoissonFamily())
    logger.info(f"Calibrated Poisson design on {Path(path).name}: beta={calibrated.beta}")
    state = calibrated.state
    return calibrated.beta.copy(), state.alpha.copy(), state.gamma.copy(), z_used, y0


def _calibrated_design(spec: DgpSpec, rng: np.random.Generator) -> SimulatedPanel:
    dynamic = spec.kind == DgpKind.CALIBRATED_POISSON_DYNAMIC
    _, alpha0, gamma, z0, y_start = _calibration(str(spec.series_path), dynamic)
    beta = spec.true_beta()
    alpha = np.tile(alpha0, spec.copies)
    z = np.tile(z0, (spec.copies, 1))
    base = alpha[:, None] + gamma[None, :]

    if not dynamic:
        X = np.stack([z, z**2], axis=-1)
        y = rng.poisson(np.exp(X @ beta + base)).astype(float)
        return SimulatedPanel(_panel(y, X, ("z", "z2")), beta, alpha, gamma, spec.family)

    n_units, n_periods = z.shape
    X = np.empty((n_units, n_periods, 3))
    y = np.empty((n_units, n_periods))
    y_prev = np.tile(y_start, spec.copies)
    for t in range(n_periods):
        X[:, t] = np.stack([np.log1p(y_prev), z[:, t], z[:, t] ** 2], axis=-1)
        y[:, t] = rng.poisson(np.exp(X[:, t] @ beta + base[:, t]))
        y_prev = y[:, t]
    return SimulatedPanel(_panel(y, X, ("log1p_y_lag", "z", "z2")), beta, alpha, gamma, spec.family)


def generate(spec: DgpSpec, rep: int) -> SimulatedPanel:
    """Draw replication `rep` of a design; identical (spec, rep) give identical panels."""
    rng = replication_rng(spec.seed, rep)
    match spec.kind:
        case DgpKind.NEYMAN_SCOTT:
            return _neyman_scott(spec, rng)
        case DgpKind.DYNAMIC_PROBIT_AR | DgpKind.DYNAMIC_PROBIT_TREND:
            return _dynamic_design(spec, rng)
        case DgpKind.CALIBRATED_POISSON_STATIC | DgpKind.CALIBRATED_POISSON_DYNAMIC:
            return _calibrated_design(spec, rng)
        case _:
            return _static_design(spec, rng)
