"""Analytical bias corrections for common parameters and average partial effects.

All expectations are replaced by their plug-in values at the fixed effects estimate.
Per-unit sums run over observed periods; lag sums use only pairs of observed cells,
rescaled by (observed periods) / (observed pairs), which is T / (T - j) on balanced
panels. The effective panel lengths are n_obs / N (periods) and n_obs / T (units).
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from twofe.config import settings
from twofe.errors import InvalidSpec, InvalidTrim, SingularInformation
from twofe.estimation.ape import compute_ape
from twofe.estimation.projection import psi_from, xi_hat
from twofe.estimation.solver import FitOptions, fit_effects
from twofe.families.base import LikelihoodFamily
from twofe.families.effects import PartialEffectSpec, partial_effect_bundle
from twofe.models.results import (
    ApeCorrectionResult,
    CorrectionResult,
    FitResult,
    VarianceMode,
)

logger = logging.getLogger(__name__)

# Smallest eigenvalue of W relative to the unprojected information
SINGULAR_RATIO = 1e-10


@dataclass
class PlugIns:
    """Plug-in derivatives at the fit, zero on missing cells.

    `d_beta_pi`, `d_beta_pi2` and `d_beta` are the projected versions
    d_beta_pi^q ell - d_pi^(q+1) ell * Xi.
    """

    mask: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    xi: np.ndarray
    d_beta: np.ndarray
    d_beta_pi: np.ndarray
    d_beta_pi2: np.ndarray
    d_beta_beta: np.ndarray
    n_obs: int

    @property
    def periods_effective(self) -> float:
        return self.n_obs / self.mask.shape[0]

    @property
    def units_effective(self) -> float:
        return self.n_obs / self.mask.shape[1]


def plug_ins(fit: FitResult, family: LikelihoodFamily) -> PlugIns:
    d = fit.dataset
    bundle = family.loglik_bundle(d.y, d.X, fit.beta, fit.pi_hat)
    xi = xi_hat(fit, family)

    def masked(values: np.ndarray) -> np.ndarray:
        keep = d.mask.reshape(d.mask.shape + (1,) * (values.ndim - 2))
        return np.where(keep, values, 0.0)

    d1, d2, d3 = masked(bundle.d_pi), masked(bundle.d_pi2), masked(bundle.d_pi3)
    return PlugIns(
        mask=d.mask,
        d1=d1,
        d2=d2,
        d3=d3,
        xi=masked(xi),
        d_beta=masked(bundle.d_beta - d1[..., None] * xi),
        d_beta_pi=masked(bundle.d_beta_pi - d2[..., None] * xi),
        d_beta_pi2=masked(bundle.d_beta_pi2 - d3[..., None] * xi),
        d_beta_beta=masked(bundle.d_beta_beta),
        n_obs=d.n_obs,
    )


def check_trim(trim: int, n_periods: int) -> None:
    if trim < 0 or trim > n_periods - 2:
        raise InvalidTrim(f"trimming parameter L={trim} must lie in [0, {n_periods - 2}] for T={n_periods}")


def lag_sum(lead: np.ndarray, lagged: np.ndarray, mask: np.ndarray, trim: int) -> np.ndarray:
    """Per-unit sum over j = 0..trim of c_ij * sum_t lead[i, t-j] * lagged[i, t].

    `lagged` may carry trailing axes. c_ij is (observed periods of i) divided by the
    number of t with both (t-j) and t observed; it is T / (T - j) on balanced panels.
    """
    n_periods = mask.shape[1]
    check_trim(trim, n_periods)
    extra = (1,) * (lagged.ndim - 2)
    lead = np.where(mask, lead, 0.0)
    lagged = np.where(mask.reshape(mask.shape + extra), lagged, 0.0)
    observed = mask.sum(axis=1)

    total = np.zeros((mask.shape[0],) + lagged.shape[2:])
    for j in range(trim + 1):
        pairs = mask[:, : n_periods - j] & mask[:, j:]
        n_pairs = pairs.sum(axis=1)
        products = lead[:, : n_periods - j].reshape(pairs.shape + extra) * lagged[:, j:]
        products = np.where(pairs.reshape(pairs.shape + extra), products, 0.0)
        factor = np.where(n_pairs > 0, observed / np.maximum(n_pairs, 1), 0.0)
        total += factor.reshape((-1,) + extra) * products.sum(axis=1)
    return total


def estimate_W(fit: FitResult, family: LikelihoodFamily, plug: PlugIns | None = None) -> np.ndarray:
    """
    W = -(1/n) sum [d_beta_beta ell - d_pi2 ell Xi Xi'].

    Raises:
        SingularInformation: W is not positive definite, which signals a regressor
            that is (nearly) collinear with the effects.
    """
    plug = plug or plug_ins(fit, family)
    outer_xi = plug.xi[..., :, None] * plug.xi[..., None, :]
    terms = plug.d_beta_beta - plug.d2[..., None, None] * outer_xi
    W = -terms.sum(axis=(0, 1)) / plug.n_obs
    W = 0.5 * (W + W.T)

    reference = float(np.max(np.abs(np.diag(-plug.d_beta_beta.sum(axis=(0, 1)) / plug.n_obs))))
    smallest = float(np.linalg.eigvalsh(W).min())
    if not smallest > SINGULAR_RATIO * max(reference, np.finfo(float).tiny):
        raise SingularInformation(
            f"W is not positive definite (smallest eigenvalue {smallest:.3e}); a regressor "
            "has no variation beyond the effects"
        )
    return W


def _unit_denominators(plug: PlugIns) -> np.ndarray:
    return plug.d2.sum(axis=1)


def _period_denominators(plug: PlugIns) -> np.ndarray:
    return plug.d2.sum(axis=0)


def estimate_B(
    fit: FitResult,
    family: LikelihoodFamily,
    trim: int,
    plug: PlugIns | None = None,
    no_bartlett: bool = False,
) -> np.ndarray:
    """Bias term from the unit effects (order 1/T).

    Raises:
        InvalidTrim: trim outside [0, T - 2].
    """
    check_trim(trim, fit.dataset.T)
    plug = plug or plug_ins(fit, family)
    denominator = _unit_denominators(plug)[:, None]
    spectral = lag_sum(plug.d1, plug.d_beta_pi, plug.mask, trim)
    curvature = plug.d_beta_pi2.sum(axis=1)
    if not no_bartlett:
        return -np.mean((spectral + 0.5 * curvature) / denominator, axis=0)
    score_square = (plug.d1**2).sum(axis=1)[:, None]
    return -np.mean(spectral / denominator, axis=0) + 0.5 * np.mean(
        score_square * curvature / denominator**2, axis=0
    )


def estimate_D(
    fit: FitResult,
    family: LikelihoodFamily,
    plug: PlugIns | None = None,
    no_bartlett: bool = False,
) -> np.ndarray:
    """Bias term from the time effects (order 1/N); no lag structure across units."""
    plug = plug or plug_ins(fit, family)
    denominator = _period_denominators(plug)[:, None]
    spectral = (plug.d1[..., None] * plug.d_beta_pi).sum(axis=0)
    curvature = plug.d_beta_pi2.sum(axis=0)
    if not no_bartlett:
        return -np.mean((spectral + 0.5 * curvature) / denominator, axis=0)
    score_square = (plug.d1**2).sum(axis=0)[:, None]
    return -np.mean(spectral / denominator, axis=0) + 0.5 * np.mean(
        score_square * curvature / denominator**2, axis=0
    )


def bias_corrected(
    beta_hat: np.ndarray,
    W: np.ndarray,
    B: np.ndarray,
    D: np.ndarray,
    n_periods: float,
    n_units: float,
) -> np.ndarray:
    """beta_hat - W^{-1} B / T - W^{-1} D / N."""
    return beta_hat - np.linalg.solve(W, B) / n_periods - np.linalg.solve(W, D) / n_units


def normal_quantile(level: float) -> float:
    """Two-sided critical value for a confidence level in (0, 1)."""
    return float(norm.ppf(0.5 + level / 2.0))


def analytical_correct(
    fit: FitResult,
    family: LikelihoodFamily,
    trim: int,
    no_bartlett: bool = False,
    level: float | None = None,
    plug: PlugIns | None = None,
) -> CorrectionResult:
    """
    Analytically bias-corrected common parameters with plug-in standard errors.

    Args:
        fit: Converged fixed effects fit.
        family: The family used for the fit.
        trim: Number of lags in the spectral sums (0..T-2).
        no_bartlett: Use bias and variance expressions that do not rely on the
            information matrix equalities (conditional moment models).
        level: Confidence level of the reported intervals.

    Raises:
        InvalidTrim: trim outside [0, T - 2].
        SingularInformation: W not positive definite.
    """
    check_trim(trim, fit.dataset.T)
    level = settings.confidence_level if level is None else level
    plug = plug or plug_ins(fit, family)

    W = estimate_W(fit, family, plug)
    B = estimate_B(fit, family, trim, plug, no_bartlett)
    D = estimate_D(fit, family, plug, no_bartlett)
    beta_tilde = bias_corrected(fit.beta, W, B, D, plug.periods_effective, plug.units_effective)

    W_inv = np.linalg.inv(W)
    if no_bartlett:
        scores = plug.d_beta.reshape(-1, plug.d_beta.shape[-1])
        omega = scores.T @ scores / plug.n_obs
        vcov = W_inv @ omega @ W_inv / plug.n_obs
    else:
        vcov = W_inv / plug.n_obs
    vcov = 0.5 * (vcov + vcov.T)

    half_width = normal_quantile(level) * np.sqrt(np.diag(vcov))
    logger.info(f"Analytical correction (L={trim}): beta_hat={fit.beta}, beta_tilde={beta_tilde}")
    return CorrectionResult(
        beta_hat=fit.beta.copy(),
        W_hat=W,
        B_hat=B,
        D_hat=D,
        beta_tilde_A=beta_tilde,
        vcov=vcov,
        trim_L=trim,
        no_bartlett=no_bartlett,
        confidence_level=level,
        ci_lower=beta_tilde - half_width,
        ci_upper=beta_tilde + half_width,
    )


def center_effects(effects: np.ndarray, mask: np.ndarray, mode: VarianceMode, delta: np.ndarray) -> np.ndarray:
    """Deviation of per-cell effects from the mean the variance mode treats as common.

    conditional and iid-units remove per-period means over observed units,
    stationary-times removes per-unit means over observed periods, both removes the
    overall average.
    """
    observed = mask[None, :, :]
    match mode:
        case VarianceMode.IID_UNITS | VarianceMode.CONDITIONAL:
            center = effects.sum(axis=1, keepdims=True) / mask.sum(axis=0)[None, None, :]
        case VarianceMode.STATIONARY_TIMES:
            center = effects.sum(axis=2, keepdims=True) / mask.sum(axis=1)[None, :, None]
        case _:
            center = delta[:, None, None]
    return np.where(observed, effects - center, 0.0)


def _ape_variance(
    effects: np.ndarray,
    gamma: np.ndarray,
    mask: np.ndarray,
    mode: VarianceMode,
    delta: np.ndarray,
) -> np.ndarray:
    """Effect-by-effect covariance matrix; `effects` and `gamma` are (S, N, T).

    conditional and iid-units share one estimator: the influence terms plus the
    within-unit sums of centered effects.
    """
    n_obs = int(mask.sum())
    flat_gamma = gamma.reshape(gamma.shape[0], -1)
    centered = center_effects(effects, mask, mode, delta)
    unit_sums = centered.sum(axis=2)
    total = flat_gamma @ flat_gamma.T + unit_sums @ unit_sums.T
    if mode in (VarianceMode.STATIONARY_TIMES, VarianceMode.BOTH):
        period_sums = centered.sum(axis=1)
        flat = centered.reshape(centered.shape[0], -1)
        total = total + period_sums @ period_sums.T - flat @ flat.T
    return 0.5 * (total + total.T) / n_obs**2


def ape_correction(
    fit: FitResult,
    family: LikelihoodFamily,
    specs: Sequence[PartialEffectSpec],
    trim: int,
    variance_mode: VarianceMode = VarianceMode.CONDITIONAL,
    correction: CorrectionResult | None = None,
    level: float | None = None,
    opts: FitOptions | None = None,
) -> ApeCorrectionResult:
    """
    Analytically bias-corrected average partial effects and their standard errors.

    The effects are first rebuilt at the corrected common parameters, with the effects
    re-solved at that value, then the effect-level bias terms are removed.

    Raises:
        InvalidSpec: A spec does not fit the panel's regressors.
        InvalidTrim, SingularInformation: As for `analytical_correct`.
    """
    d = fit.dataset
    level = settings.confidence_level if level is None else level
    if not specs:
        raise InvalidSpec("no partial effect requested")
    for spec in specs:
        spec.validate(d.K)
    plug = plug_ins(fit, family)
    correction = correction or analytical_correct(fit, family, trim, level=level, plug=plug)

    ape_hat = compute_ape(fit, family, specs)
    opts = opts or FitOptions(normalization=fit.state.normalization, penalty_b=fit.penalty_b)
    tilde_state = fit_effects(d, family, correction.beta_tilde_A, start=fit.state, opts=opts)
    ape_tilde = compute_ape(fit, family, specs, state=tilde_state)

    W_inv = np.linalg.inv(correction.W_hat)
    unit_den = _unit_denominators(plug)
    period_den = _period_denominators(plug)
    B_delta, D_delta, gammas = [], [], []
    for spec in specs:
        effect = partial_effect_bundle(family, spec, d.X, fit.beta, fit.pi_hat)
        d_pi = np.where(d.mask, effect.d_pi, 0.0)
        d_pi2 = np.where(d.mask, effect.d_pi2, 0.0)
        d_beta = np.where(d.mask[..., None], effect.d_beta, 0.0)
        psi = psi_from(fit, family, d_pi)

        curvature = d_pi2 - plug.d3 * psi
        spectral = lag_sum(plug.d1, plug.d2 * psi, plug.mask, trim)
        B_delta.append(np.mean((spectral - 0.5 * curvature.sum(axis=1)) / unit_den))
        cross = (plug.d1 * plug.d2 * psi - 0.5 * curvature).sum(axis=0)
        D_delta.append(np.mean(cross / period_den))

        projected_d_beta = (d_beta - d_pi[..., None] * plug.xi).sum(axis=(0, 1)) / plug.n_obs
        gamma = plug.d_beta @ (W_inv @ projected_d_beta) - psi * plug.d1
        gammas.append(np.where(d.mask, gamma, 0.0))

    B_delta = np.asarray(B_delta)
    D_delta = np.asarray(D_delta)
    delta_tilde_A = ape_tilde.delta - B_delta / plug.periods_effective - D_delta / plug.units_effective
    V_delta = _ape_variance(ape_hat.effects, np.stack(gammas), d.mask, variance_mode, ape_hat.delta)

    logger.info(
        f"APE correction ({variance_mode.value}): delta_hat={ape_hat.delta}, delta_tilde_A={delta_tilde_A}"
    )
    return ApeCorrectionResult(
        delta_hat=ape_hat.delta,
        delta_tilde=ape_tilde.delta,
        B_delta=B_delta,
        D_delta=D_delta,
        delta_tilde_A=delta_tilde_A,
        V_delta=V_delta,
        variance_mode=variance_mode,
        specs=list(specs),
        trim_L=trim,
        confidence_level=level,
    )
