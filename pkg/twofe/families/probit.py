"""Probit family.

With q = 2y - 1 and z = q * eta the log-likelihood is log Phi(z). All index
derivatives are written through the inverse Mills ratio lambda(z) = phi(z)/Phi(z),
evaluated in log space so tails stay finite for |eta| well beyond 40.
"""

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from twofe.families.base import BinaryFamily, IndexDerivatives

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def _normal_pdf(z: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * z * z - _LOG_SQRT_2PI)


def inverse_mills(z: np.ndarray) -> np.ndarray:
    """phi(z) / Phi(z) without forming either factor in linear space."""
    return np.exp(-0.5 * z * z - _LOG_SQRT_2PI - log_ndtr(z))


class ProbitFamily(BinaryFamily):
    name = "probit"

    def index_derivatives(self, y: np.ndarray, eta: np.ndarray) -> IndexDerivatives:
        q = 2.0 * np.asarray(y, dtype=float) - 1.0
        z = q * eta
        lam = inverse_mills(z)
        lam1 = -lam * (z + lam)
        lam2 = -lam1 * (z + lam) - lam * (1.0 + lam1)
        return IndexDerivatives(ell=log_ndtr(z), d1=q * lam, d2=lam1, d3=q * lam2)

    def mean_derivatives(self, eta: np.ndarray) -> tuple[np.ndarray, ...]:
        eta = np.asarray(eta, dtype=float)
        pdf = _normal_pdf(eta)
        return (
            ndtr(eta),
            pdf,
            -eta * pdf,
            (eta * eta - 1.0) * pdf,
            (3.0 * eta - eta**3) * pdf,
        )

    def link(self, mean: np.ndarray) -> np.ndarray:
        return ndtri(np.clip(mean, 1e-3, 1.0 - 1e-3))
