"""Weighted two-way projection onto the additive space {a_i + g_t}."""

import logging
from dataclasses import dataclass

import numpy as np

from twofe.config import settings
from twofe.errors import DegenerateProjection
from twofe.estimation.structured import StructuredHessian, solve_structured
from twofe.families.base import LikelihoodFamily
from twofe.families.effects import PartialEffectSpec, partial_effect_bundle
from twofe.models.results import FitResult

logger = logging.getLogger(__name__)


@dataclass
class TwoWayProjection:
    """Result of `project()`.

    Coefficients are normalized so that sum(a) == sum(g). Fitted values and residuals
    are zero on cells outside the mask.
    """

    weights: np.ndarray
    a: np.ndarray
    g: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    sweeps: int = 0
    method: str = "alternating"


def _direct(weights: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n_units = weights.shape[0]
    h = StructuredHessian.from_weights(weights, penalty_b=1.0, scale=1.0)
    weighted = weights * target
    rhs = np.concatenate([weighted.sum(axis=1), weighted.sum(axis=0)])
    solution = solve_structured(h, rhs)
    return solution[:n_units], solution[n_units:]


def project(
    weights: np.ndarray,
    target: np.ndarray,
    mask: np.ndarray | None = None,
    tol: float | None = None,
    max_sweeps: int | None = None,
) -> TwoWayProjection:
    """
    Weighted least squares fit of `target` by a_i + g_t.

    Runs alternating weighted means until fitted values move by less than `tol`,
    then falls back to a direct solve after `max_sweeps` (default 10 (N + T)).

    Args:
        weights: Positive cell weights (N x T).
        target: Values to project (N x T).
        mask: Cells taking part; defaults to cells with positive weight.

    Raises:
        DegenerateProjection: A unit or period has zero total weight.
    """
    weights = np.asarray(weights, dtype=float)
    target = np.asarray(target, dtype=float)
    mask = weights > 0 if mask is None else np.asarray(mask, dtype=bool)
    weights = np.where(mask, weights, 0.0)
    target = np.where(mask, target, 0.0)
    tol = settings.projection_tol if tol is None else tol

    n_units, n_periods = weights.shape
    row_weight = weights.sum(axis=1)
    col_weight = weights.sum(axis=0)
    if np.any(row_weight <= 0.0) or np.any(col_weight <= 0.0):
        raise DegenerateProjection(
            f"{int((row_weight <= 0).sum())} units and {int((col_weight <= 0).sum())} periods "
            "have zero projection weight"
        )
    max_sweeps = 10 * (n_units + n_periods) if max_sweeps is None else max_sweeps

    a = np.zeros(n_units)
    g = np.zeros(n_periods)
    fitted = np.zeros_like(target)
    scale = 1.0 + float(np.max(np.abs(target)))
    method = "alternating"
    sweeps = 0
    while True:
        sweeps += 1
        a = (weights * (target - g[None, :])).sum(axis=1) / row_weight
        g = (weights * (target - a[:, None])).sum(axis=0) / col_weight
        updated = np.where(mask, a[:, None] + g[None, :], 0.0)
        change = float(np.max(np.abs(updated - fitted)))
        fitted = updated
        if change <= tol * scale:
            break
        if sweeps >= max_sweeps:
            logger.debug(f"Alternating projection stalled after {sweeps} sweeps, solving directly")
            a, g = _direct(weights, target)
            method = "direct"
            break

    shift = (g.sum() - a.sum()) / (n_units + n_periods)
    a = a + shift
    g = g - shift
    fitted = np.where(mask, a[:, None] + g[None, :], 0.0)
    return TwoWayProjection(
        weights=weights,
        a=a,
        g=g,
        fitted=fitted,
        residuals=np.where(mask, target - fitted, 0.0),
        sweeps=sweeps,
        method=method,
    )


def _fit_weights(fit: FitResult, family: LikelihoodFamily):
    d = fit.dataset
    bundle = family.loglik_bundle(d.y, d.X, fit.beta, fit.pi_hat)
    d2 = np.where(d.mask, bundle.d_pi2, -1.0)
    return bundle, d2, np.where(d.mask, -bundle.d_pi2, 0.0)


def xi_hat(fit: FitResult, family: LikelihoodFamily, k: int | None = None) -> np.ndarray:
    """Projection of d_beta_pi ell / d_pi2 ell in the -d_pi2 ell metric.

    Returns an N x T x K array, or N x T for a single regressor `k`.
    """
    d = fit.dataset
    bundle, d2, weights = _fit_weights(fit, family)
    columns = range(d.K) if k is None else [k]
    xi = np.stack(
        [project(weights, bundle.d_beta_pi[..., j] / d2, mask=d.mask).fitted for j in columns],
        axis=-1,
    )
    return xi if k is None else xi[..., 0]


def psi_from(fit: FitResult, family: LikelihoodFamily, d_pi_delta: np.ndarray) -> np.ndarray:
    """Projection of d_pi Delta / d_pi2 ell in the -d_pi2 ell metric."""
    d = fit.dataset
    _, d2, weights = _fit_weights(fit, family)
    return project(weights, np.asarray(d_pi_delta) / d2, mask=d.mask).fitted


def psi_hat(fit: FitResult, family: LikelihoodFamily, spec: PartialEffectSpec) -> np.ndarray:
    d = fit.dataset
    effect = partial_effect_bundle(family, spec, d.X, fit.beta, fit.pi_hat)
    return psi_from(fit, family, np.where(d.mask, effect.d_pi, 0.0))
