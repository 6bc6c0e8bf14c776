"""Logit family."""

import numpy as np
from scipy.special import expit, logit

from twofe.families.base import BinaryFamily, IndexDerivatives


class LogitFamily(BinaryFamily):
    name = "logit"

    def index_derivatives(self, y: np.ndarray, eta: np.ndarray) -> IndexDerivatives:
        p = expit(eta)
        s = p * (1.0 - p)
        return IndexDerivatives(
            ell=y * eta - np.logaddexp(0.0, eta),
            d1=y - p,
            d2=-s,
            d3=-s * (1.0 - 2.0 * p),
        )

    def mean_derivatives(self, eta: np.ndarray) -> tuple[np.ndarray, ...]:
        p = expit(np.asarray(eta, dtype=float))
        s = p * (1.0 - p)
        return (
            p,
            s,
            s * (1.0 - 2.0 * p),
            s * (1.0 - 6.0 * p + 6.0 * p * p),
            s * (1.0 - 2.0 * p) * (1.0 - 12.0 * p + 12.0 * p * p),
        )

    def link(self, mean: np.ndarray) -> np.ndarray:
        return logit(np.clip(mean, 1e-3, 1.0 - 1e-3))
