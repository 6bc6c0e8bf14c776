"""Abstract likelihood family interface.

A family describes a single-index model: the log-likelihood of cell (i, t)
depends on the common parameters and the effects only through the index
eta_it = x_it'beta + pi_it with pi_it = alpha_i + gamma_t. Implementations only
provide derivatives in eta; every beta derivative follows by the chain rule.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from twofe.errors import InvalidOutcome


@dataclass(frozen=True)
class IndexDerivatives:
    """Log-likelihood and its first three derivatives in the index."""

    ell: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray


@dataclass(frozen=True)
class DerivativeBundle:
    """Per-cell log-likelihood derivatives in (beta, pi).

    Shapes follow the input cells: scalars per cell for pi derivatives, a
    trailing K axis for beta derivatives and K x K for the beta Hessian.
    """

    ell: np.ndarray
    d_beta: np.ndarray
    d_pi: np.ndarray
    d_pi2: np.ndarray
    d_pi3: np.ndarray
    d_beta_pi: np.ndarray
    d_beta_pi2: np.ndarray
    d_beta_beta: np.ndarray


class LikelihoodFamily(ABC):
    """Abstract base class for likelihood families."""

    name: ClassVar[str]

    @abstractmethod
    def index_derivatives(self, y: np.ndarray, eta: np.ndarray) -> IndexDerivatives:
        """
        Evaluate the log-likelihood and its index derivatives.

        Args:
            y: Outcomes
            eta: Single index x'beta + pi, same shape as y

        Returns:
            IndexDerivatives with ell and the first three eta derivatives
        """
        pass

    @abstractmethod
    def mean_derivatives(self, eta: np.ndarray) -> tuple[np.ndarray, ...]:
        """
        Conditional mean function F and its first four derivatives at eta.

        Partial effects are built from these.
        """
        pass

    @abstractmethod
    def link(self, mean: np.ndarray) -> np.ndarray:
        """Map an outcome mean to an index value (used for starting values)."""
        pass

    def check_outcome(self, y: np.ndarray) -> None:
        """Raise InvalidOutcome when observed outcomes leave the family's support."""
        return None

    def degenerate_groups(self, y: np.ndarray, mask: np.ndarray, axis: int) -> np.ndarray:
        """Flag units (axis=1) or periods (axis=0) whose outcomes admit no finite effect."""
        return np.zeros(mask.shape[1 - axis], dtype=bool)

    @staticmethod
    def index(x: np.ndarray, beta: np.ndarray, pi: np.ndarray | float) -> np.ndarray:
        return np.asarray(x, dtype=float) @ np.asarray(beta, dtype=float) + pi

    def loglik_bundle(
        self,
        y: np.ndarray | float,
        x: np.ndarray,
        beta: np.ndarray,
        pi: np.ndarray | float,
    ) -> DerivativeBundle:
        """All derivatives of ell_it(beta, pi) used by the estimators.

        `x` carries the K regressors on its last axis; `y` and `pi` broadcast
        against x[..., 0].
        """
        x = np.asarray(x, dtype=float)
        eta = self.index(x, beta, pi)
        y = np.broadcast_to(np.asarray(y, dtype=float), eta.shape)
        deriv = self.index_derivatives(y, eta)
        outer = x[..., :, None] * x[..., None, :]
        return DerivativeBundle(
            ell=deriv.ell,
            d_beta=deriv.d1[..., None] * x,
            d_pi=deriv.d1,
            d_pi2=deriv.d2,
            d_pi3=deriv.d3,
            d_beta_pi=deriv.d2[..., None] * x,
            d_beta_pi2=deriv.d3[..., None] * x,
            d_beta_beta=deriv.d2[..., None, None] * outer,
        )


class BinaryFamily(LikelihoodFamily, ABC):
    """Shared outcome checks for 0/1 outcome families."""

    def check_outcome(self, y: np.ndarray) -> None:
        values = np.asarray(y)
        if not np.isin(values, (0.0, 1.0)).all():
            raise InvalidOutcome(f"{self.name} outcomes must be 0 or 1")

    def degenerate_groups(self, y: np.ndarray, mask: np.ndarray, axis: int) -> np.ndarray:
        ones = np.where(mask, y, 0.0).sum(axis=axis)
        counts = mask.sum(axis=axis)
        return (ones == 0) | (ones == counts)
