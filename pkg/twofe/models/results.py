"""Result containers for fits, corrections, partial effects and the jackknife."""

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from twofe.classes.enum import StrEnum
from twofe.models.panel import PanelDataset


class Normalization(StrEnum):
    """How the (alpha, gamma) level is pinned down."""

    PENALTY = "penalty"
    DROP_FIRST_ALPHA = "drop-first-alpha"
    DROP_FIRST_GAMMA = "drop-first-gamma"


class VarianceMode(StrEnum):
    """Sampling assumption behind the APE standard errors."""

    CONDITIONAL = "conditional"
    IID_UNITS = "iid-units"
    STATIONARY_TIMES = "stationary-times"
    BOTH = "both"


@dataclass
class ParameterState:
    """Common parameters and the two sets of effects."""

    beta: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    normalization: Normalization = Normalization.PENALTY

    @property
    def pi(self) -> np.ndarray:
        return self.alpha[:, None] + self.gamma[None, :]

    @property
    def phi(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.gamma])

    def copy(self) -> "ParameterState":
        return ParameterState(
            beta=self.beta.copy(),
            alpha=self.alpha.copy(),
            gamma=self.gamma.copy(),
            normalization=self.normalization,
        )

    def renormalized(self, normalization: Normalization) -> "ParameterState":
        """Shift (alpha + c, gamma - c) to satisfy another normalization; pi is unchanged."""
        match normalization:
            case Normalization.DROP_FIRST_ALPHA:
                shift = -self.alpha[0]
            case Normalization.DROP_FIRST_GAMMA:
                shift = self.gamma[0]
            case _:
                shift = (self.gamma.sum() - self.alpha.sum()) / (self.alpha.size + self.gamma.size)
        alpha = self.alpha + shift
        gamma = self.gamma - shift
        if normalization == Normalization.DROP_FIRST_ALPHA:
            alpha[0] = 0.0
        elif normalization == Normalization.DROP_FIRST_GAMMA:
            gamma[0] = 0.0
        return ParameterState(self.beta.copy(), alpha, gamma, normalization)

    def to_dict(self) -> dict[str, Any]:
        return {
            "beta": self.beta.tolist(),
            "alpha": self.alpha.tolist(),
            "gamma": self.gamma.tolist(),
            "normalization": self.normalization.value,
        }


@dataclass
class FitResult:
    """Fixed effects maximum likelihood fit.

    `loglik` is the sum of log-likelihood contributions over observed cells;
    `objective` is the scaled, penalized criterion the solver maximizes.
    `gradient_norm` is the max-norm of the objective gradient divided by
    (1 + |objective|).
    """

    state: ParameterState
    dataset: PanelDataset
    family: str
    loglik: float = float("nan")
    objective: float = float("nan")
    iterations: int = 0
    halvings: int = 0
    gradient_norm: float = float("nan")
    converged: bool = False
    penalty_b: float = 1.0
    objective_path: list[float] = field(default_factory=list)

    @property
    def beta(self) -> np.ndarray:
        return self.state.beta

    @property
    def pi_hat(self) -> np.ndarray:
        return self.state.pi

    @property
    def eta_hat(self) -> np.ndarray:
        return self.dataset.X @ self.state.beta + self.state.pi

    def diagnostics(self) -> dict[str, Any]:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "halvings": self.halvings,
            "gradient_norm": self.gradient_norm,
            "loglik": self.loglik,
            "normalization": self.state.normalization.value,
            "penalty_b": self.penalty_b,
        }


@dataclass
class CorrectionResult:
    """Analytical bias correction of the common parameters."""

    beta_hat: np.ndarray
    W_hat: np.ndarray
    B_hat: np.ndarray
    D_hat: np.ndarray
    beta_tilde_A: np.ndarray
    vcov: np.ndarray
    trim_L: int
    no_bartlett: bool = False
    confidence_level: float = 0.95
    ci_lower: np.ndarray | None = None
    ci_upper: np.ndarray | None = None

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.vcov))

    @property
    def W_inv(self) -> np.ndarray:
        return np.linalg.inv(self.W_hat)


@dataclass
class ApeValue:
    """Average partial effects and their per-cell values.

    Attributes:
        delta: One average per requested spec.
        effects: Per-cell effects, shape (n_specs, N, T), zero on missing cells.
        beta: Common parameters the effects were evaluated at.
    """

    delta: np.ndarray
    effects: np.ndarray
    beta: np.ndarray
    specs: list[Any] = field(default_factory=list)


@dataclass
class ApeCorrectionResult:
    """Analytical correction and standard errors of average partial effects.

    `delta_tilde` is the average effect rebuilt at the corrected common
    parameters, before the effect-level bias terms are removed.
    """

    delta_hat: np.ndarray
    delta_tilde: np.ndarray
    B_delta: np.ndarray
    D_delta: np.ndarray
    delta_tilde_A: np.ndarray
    V_delta: np.ndarray
    variance_mode: VarianceMode
    specs: list[Any] = field(default_factory=list)
    trim_L: int = 0
    confidence_level: float = 0.95

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.V_delta))


@dataclass
class JackknifeResult:
    """Split-panel jackknife correction.

    `corrected` always equals 3 * full_estimate - mean(half_time_estimates)
    - mean(half_unit_estimates), coordinate-wise.
    """

    corrected: np.ndarray
    full_estimate: np.ndarray
    half_time_estimates: np.ndarray
    half_unit_estimates: np.ndarray
    partitions_used: list[tuple[tuple[int, ...], tuple[int, ...]]]
    rng_seed: int | None
    full_fit: FitResult | None = None
    se: np.ndarray | None = None

    def recompute(self) -> np.ndarray:
        return split_panel_combination(
            self.full_estimate, self.half_time_estimates, self.half_unit_estimates
        )


@dataclass
class HomogeneityResult:
    """Wald test that two halves of the panel share the same common parameters."""

    axis: str
    statistic: float
    dof: int
    p_value: float
    estimates: np.ndarray

    def to_dict(self) -> dict[str, Any]:
        return {
            "axis": self.axis,
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "estimates": self.estimates.tolist(),
        }


def split_panel_combination(
    full: np.ndarray, time_halves: np.ndarray, unit_halves: np.ndarray
) -> np.ndarray:
    return 3.0 * full - time_halves.mean(axis=0) - unit_halves.mean(axis=0)
