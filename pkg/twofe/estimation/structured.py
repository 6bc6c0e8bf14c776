"""Solves with the (alpha, gamma) block of the negative Hessian.

For weights w_it = -d2 ell_it the block is

    scale * ( [[diag(a), W], [W', diag(g)]] + b * v v' ),   v = (1_N, -1_T)

with a_i = sum_t w_it and g_t = sum_i w_it. The larger of the two diagonal blocks
plus its share of the rank-one penalty is inverted with Sherman-Morrison; the
Schur complement of the smaller block is factored densely. Work is
O(N T min(N, T) + min(N, T)^3).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from twofe.errors import NumericalBreakdown
from twofe.models.results import Normalization


@dataclass(frozen=True)
class StructuredHessian:
    """Negative Hessian of the scaled objective in (alpha, gamma).

    Attributes:
        diag_alpha: Row sums of the weights (N).
        diag_gamma: Column sums of the weights (T).
        cross: Cell weights, zero on missing cells (N x T).
        penalty_b: Penalty constant; ignored under drop normalizations.
        scale: Overall factor, 1/sqrt(NT) for the estimation objective.
        normalization: Which effect (if any) is held at zero.
    """

    diag_alpha: np.ndarray
    diag_gamma: np.ndarray
    cross: np.ndarray
    penalty_b: float = 1.0
    scale: float = 1.0
    normalization: Normalization = Normalization.PENALTY

    @classmethod
    def from_weights(
        cls,
        weights: np.ndarray,
        mask: np.ndarray | None = None,
        penalty_b: float = 1.0,
        scale: float | None = None,
        normalization: Normalization = Normalization.PENALTY,
    ) -> "StructuredHessian":
        weights = np.asarray(weights, dtype=float)
        if mask is not None:
            weights = np.where(mask, weights, 0.0)
        n_units, n_periods = weights.shape
        return cls(
            diag_alpha=weights.sum(axis=1),
            diag_gamma=weights.sum(axis=0),
            cross=weights,
            penalty_b=penalty_b,
            scale=1.0 / np.sqrt(n_units * n_periods) if scale is None else scale,
            normalization=normalization,
        )

    @property
    def N(self) -> int:
        return self.diag_alpha.size

    @property
    def T(self) -> int:
        return self.diag_gamma.size

    @property
    def effective_b(self) -> float:
        return self.penalty_b if self.normalization == Normalization.PENALTY else 0.0

    def dropped_index(self) -> int | None:
        """Position in the stacked (alpha, gamma) vector held at zero, if any."""
        match self.normalization:
            case Normalization.DROP_FIRST_ALPHA:
                return 0
            case Normalization.DROP_FIRST_GAMMA:
                return self.N
            case _:
                return None


def dense_matrix(h: StructuredHessian) -> np.ndarray:
    """The full (N+T) x (N+T) matrix, including the penalty term with `h.penalty_b`."""
    v = np.concatenate([np.ones(h.N), -np.ones(h.T)])
    top = np.hstack([np.diag(h.diag_alpha), h.cross])
    bottom = np.hstack([h.cross.T, np.diag(h.diag_gamma)])
    return h.scale * (np.vstack([top, bottom]) + h.penalty_b * np.outer(v, v))


def _sherman_morrison(diag: np.ndarray, b: float, rhs: np.ndarray) -> np.ndarray:
    """(diag(d) + b 1 1')^{-1} rhs for rhs of shape (n,) or (n, m)."""
    inv = 1.0 / diag
    scaled = inv.reshape(-1, *([1] * (rhs.ndim - 1))) * rhs
    if b == 0.0:
        return scaled
    correction = b / (1.0 + b * inv.sum())
    return scaled - correction * np.multiply.outer(inv, scaled.sum(axis=0))


def _solve_blocks(
    small_diag: np.ndarray,
    large_diag: np.ndarray,
    cross: np.ndarray,
    b: float,
    rhs_small: np.ndarray,
    rhs_large: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    # Off-diagonal block is cross - b 1 1' in the (small, large) orientation
    n_small = small_diag.size
    coupling = cross - b
    large_inv_coupling = _sherman_morrison(large_diag, b, coupling.T)
    schur = np.diag(small_diag) + b * np.ones((n_small, n_small)) - coupling @ large_inv_coupling
    try:
        factor = cho_factor(schur, lower=True)
    except LinAlgError as e:
        raise NumericalBreakdown("Schur complement of the effects block is not positive definite") from e
    x_small = cho_solve(factor, rhs_small - coupling @ _sherman_morrison(large_diag, b, rhs_large))
    x_large = _sherman_morrison(large_diag, b, rhs_large - coupling.T @ x_small)
    return x_small, x_large


def solve_structured(h: StructuredHessian, rhs: np.ndarray) -> np.ndarray:
    """
    Solve h x = rhs for one right-hand side (N+T,) or several (N+T, m).

    Under a drop normalization the dropped coordinate is removed from the system and
    returned as 0.

    Raises:
        NumericalBreakdown: A non-positive diagonal weight, or a Schur complement that
            is not positive definite.
    """
    rhs = np.asarray(rhs, dtype=float)
    n_units, n_periods = h.N, h.T
    if rhs.shape[0] != n_units + n_periods:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {n_units + n_periods}")

    keep_alpha = np.ones(n_units, dtype=bool)
    keep_gamma = np.ones(n_periods, dtype=bool)
    dropped = h.dropped_index()
    if dropped is not None and dropped < n_units:
        keep_alpha[dropped] = False
    elif dropped is not None:
        keep_gamma[dropped - n_units] = False

    diag_alpha = h.diag_alpha[keep_alpha]
    diag_gamma = h.diag_gamma[keep_gamma]
    if np.any(diag_alpha <= 0.0) or np.any(diag_gamma <= 0.0):
        raise NumericalBreakdown("non-positive diagonal weight in the effects block")

    cross = h.cross[np.ix_(keep_alpha, keep_gamma)]
    rhs_alpha = rhs[:n_units][keep_alpha] / h.scale
    rhs_gamma = rhs[n_units:][keep_gamma] / h.scale
    b = h.effective_b

    if diag_alpha.size <= diag_gamma.size:
        x_alpha, x_gamma = _solve_blocks(diag_alpha, diag_gamma, cross, b, rhs_alpha, rhs_gamma)
    else:
        x_gamma, x_alpha = _solve_blocks(diag_gamma, diag_alpha, cross.T, b, rhs_gamma, rhs_alpha)

    solution = np.zeros_like(rhs)
    solution[:n_units][keep_alpha] = x_alpha
    solution[n_units:][keep_gamma] = x_gamma
    return solution


def diagonal_gap(h: StructuredHessian) -> float:
    """Max-norm of h^{-1} minus the inverse of its unpenalized diagonal.

    Shrinks like 1/sqrt(NT) as the panel grows; for uniform unit weights with b = 1
    it equals sqrt(NT) / (min(N, T) (N + T)).
    """
    inverse = solve_structured(h, np.eye(h.N + h.T))
    diagonal = 1.0 / (h.scale * np.concatenate([h.diag_alpha, h.diag_gamma]))
    dropped = h.dropped_index()
    if dropped is not None:
        diagonal[dropped] = 0.0
    return float(np.max(np.abs(inverse - np.diag(diagonal))))
