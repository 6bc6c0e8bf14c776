"""Poisson family with log link."""

import numpy as np
from scipy.special import gammaln

from twofe.errors import InvalidOutcome, NumericOverflow
from twofe.families.base import IndexDerivatives, LikelihoodFamily

# exp() overflows float64 a little above 709.78
MAX_INDEX = 700.0


def _rate(eta: np.ndarray) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    if np.any(eta > MAX_INDEX):
        raise NumericOverflow(f"Poisson index {float(np.max(eta)):.1f} exceeds {MAX_INDEX}")
    return np.exp(eta)


class PoissonFamily(LikelihoodFamily):
    name = "poisson"

    def index_derivatives(self, y: np.ndarray, eta: np.ndarray) -> IndexDerivatives:
        rate = _rate(eta)
        return IndexDerivatives(
            ell=y * eta - rate - gammaln(y + 1.0),
            d1=y - rate,
            d2=-rate,
            d3=-rate,
        )

    def mean_derivatives(self, eta: np.ndarray) -> tuple[np.ndarray, ...]:
        rate = _rate(eta)
        return (rate, rate, rate, rate, rate)

    def link(self, mean: np.ndarray) -> np.ndarray:
        return np.log(np.maximum(mean, 1e-3))

    def check_outcome(self, y: np.ndarray) -> None:
        if np.any(np.asarray(y) < 0):
            raise InvalidOutcome("poisson outcomes must be non-negative")

    def degenerate_groups(self, y: np.ndarray, mask: np.ndarray, axis: int) -> np.ndarray:
        return np.where(mask, y, 0.0).sum(axis=axis) == 0
