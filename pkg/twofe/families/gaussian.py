"""Gaussian family with unit variance (linear model)."""

import numpy as np

from twofe.families.base import IndexDerivatives, LikelihoodFamily

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class GaussianFamily(LikelihoodFamily):
    name = "gaussian"

    def index_derivatives(self, y: np.ndarray, eta: np.ndarray) -> IndexDerivatives:
        resid = y - eta
        return IndexDerivatives(
            ell=-0.5 * resid * resid - _LOG_SQRT_2PI,
            d1=resid,
            d2=-np.ones_like(resid),
            d3=np.zeros_like(resid),
        )

    def mean_derivatives(self, eta: np.ndarray) -> tuple[np.ndarray, ...]:
        eta = np.asarray(eta, dtype=float)
        zeros = np.zeros_like(eta)
        return (eta, np.ones_like(eta), zeros, zeros, zeros)

    def link(self, mean: np.ndarray) -> np.ndarray:
        return np.asarray(mean, dtype=float)
