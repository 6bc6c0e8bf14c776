"""Damped Newton maximization of the fixed effects objective.

The solver maximizes

    L(beta, phi) = (NT)^{-1/2} [ sum_obs ell_it(beta, alpha_i + gamma_t) - b/2 (sum alpha - sum gamma)^2 ]

under the penalty normalization, or the same objective without the penalty and
with one effect held at zero under a drop normalization. Each step eliminates the
(N+T) effects block through `solve_structured` and then solves the K x K Schur
system for beta.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from twofe.config import settings
from twofe.data.validate import collinear_regressors
from twofe.errors import NotConverged, NumericalBreakdown, NumericOverflow, SeparationError, SingularInformation
from twofe.estimation.structured import StructuredHessian, solve_structured
from twofe.families.base import LikelihoodFamily
from twofe.models.panel import PanelDataset
from twofe.models.results import FitResult, Normalization, ParameterState

logger = logging.getLogger(__name__)

# Accept a damped step when the objective drops by no more than this, relative
ACCEPT_SLACK = 1e-12


@dataclass
class FitOptions:
    """Tolerances and limits of the Newton solver (defaults from `settings`)."""

    tol_grad: float = field(default_factory=lambda: settings.tol_grad)
    tol_step: float = field(default_factory=lambda: settings.tol_step)
    max_iter: int = field(default_factory=lambda: settings.max_iter)
    max_halvings: int = field(default_factory=lambda: settings.max_halvings)
    separation_bound: float = field(default_factory=lambda: settings.separation_bound)
    penalty_b: float = field(default_factory=lambda: settings.penalty_b)
    normalization: Normalization = Normalization.PENALTY


@dataclass
class _Evaluation:
    """Objective, gradient and negative Hessian blocks at one state."""

    objective: float
    loglik: float
    grad_beta: np.ndarray
    grad_phi: np.ndarray
    weights: np.ndarray
    neg_beta_beta: np.ndarray
    neg_beta_phi: np.ndarray

    @property
    def gradient_norm(self) -> float:
        largest = max(np.max(np.abs(self.grad_beta), initial=0.0), np.max(np.abs(self.grad_phi)))
        return float(largest / (1.0 + abs(self.objective)))

    @property
    def effects_gradient_norm(self) -> float:
        return float(np.max(np.abs(self.grad_phi)) / (1.0 + abs(self.objective)))


def _dropped(normalization: Normalization, n_units: int) -> int | None:
    match normalization:
        case Normalization.DROP_FIRST_ALPHA:
            return 0
        case Normalization.DROP_FIRST_GAMMA:
            return n_units
        case _:
            return None


def objective(
    dataset: PanelDataset, family: LikelihoodFamily, state: ParameterState, penalty_b: float = 1.0
) -> float:
    """Scaled, penalized objective at `state` (penalty applies only under that normalization)."""
    return _evaluate(dataset, family, state, penalty_b, with_derivatives=False).objective


def _evaluate(
    dataset: PanelDataset,
    family: LikelihoodFamily,
    state: ParameterState,
    penalty_b: float,
    with_derivatives: bool = True,
) -> _Evaluation:
    mask = dataset.mask
    scale = 1.0 / np.sqrt(dataset.N * dataset.T)
    b = penalty_b if state.normalization == Normalization.PENALTY else 0.0

    eta = dataset.X @ state.beta + state.pi
    deriv = family.index_derivatives(dataset.y, eta)
    ell = np.where(mask, deriv.ell, 0.0)
    loglik = float(ell.sum())
    gap = float(state.alpha.sum() - state.gamma.sum())
    value = scale * (loglik - 0.5 * b * gap * gap)
    if not with_derivatives:
        return _Evaluation(value, loglik, np.empty(0), np.empty(0), np.empty(0), np.empty(0), np.empty(0))

    d1 = np.where(mask, deriv.d1, 0.0)
    weights = np.where(mask, -deriv.d2, 0.0)
    X = dataset.X

    grad_beta = scale * np.einsum("it,itk->k", d1, X)
    grad_phi = scale * np.concatenate([d1.sum(axis=1) - b * gap, d1.sum(axis=0) + b * gap])
    dropped = _dropped(state.normalization, dataset.N)
    if dropped is not None:
        grad_phi[dropped] = 0.0

    weighted_x = weights[..., None] * X
    neg_beta_beta = scale * np.einsum("itk,itl->kl", weighted_x, X)
    neg_beta_phi = scale * np.hstack([weighted_x.sum(axis=1).T, weighted_x.sum(axis=0).T])
    return _Evaluation(value, loglik, grad_beta, grad_phi, weights, neg_beta_beta, neg_beta_phi)


def _hessian(dataset: PanelDataset, evaluation: _Evaluation, penalty_b: float, normalization: Normalization):
    return StructuredHessian.from_weights(
        evaluation.weights,
        penalty_b=penalty_b,
        scale=1.0 / np.sqrt(dataset.N * dataset.T),
        normalization=normalization,
    )


def _newton_direction(
    dataset: PanelDataset, evaluation: _Evaluation, opts: FitOptions, normalization: Normalization
) -> tuple[np.ndarray, np.ndarray]:
    h = _hessian(dataset, evaluation, opts.penalty_b, normalization)
    coupled = solve_structured(h, evaluation.neg_beta_phi.T)
    z = solve_structured(h, evaluation.grad_phi)
    schur = evaluation.neg_beta_beta - evaluation.neg_beta_phi @ coupled
    try:
        factor = cho_factor(schur, lower=True)
    except LinAlgError as e:
        raise NumericalBreakdown("Schur complement for beta is not positive definite") from e
    step_beta = cho_solve(factor, evaluation.grad_beta - evaluation.neg_beta_phi @ z)
    step_phi = z - coupled @ step_beta
    return step_beta, step_phi


def _shifted(state: ParameterState, step_beta: np.ndarray, step_phi: np.ndarray, size: float) -> ParameterState:
    n_units = state.alpha.size
    return ParameterState(
        beta=state.beta + size * step_beta,
        alpha=state.alpha + size * step_phi[:n_units],
        gamma=state.gamma + size * step_phi[n_units:],
        normalization=state.normalization,
    )


def _line_search(
    dataset: PanelDataset,
    family: LikelihoodFamily,
    state: ParameterState,
    current: _Evaluation,
    step_beta: np.ndarray,
    step_phi: np.ndarray,
    opts: FitOptions,
) -> tuple[ParameterState, _Evaluation, int, bool]:
    """Halve the step until the objective does not decrease; the flag reports acceptance."""
    floor = current.objective - ACCEPT_SLACK * (1.0 + abs(current.objective))
    size = 1.0
    for halvings in range(opts.max_halvings + 1):
        candidate = _shifted(state, step_beta, step_phi, size)
        try:
            evaluation = _evaluate(dataset, family, candidate, opts.penalty_b)
        except NumericOverflow:
            evaluation = None
        if evaluation is not None and np.isfinite(evaluation.objective) and evaluation.objective >= floor:
            return candidate, evaluation, halvings, True
        size *= 0.5
    return state, current, opts.max_halvings, False


def _check_separation(dataset: PanelDataset, family: LikelihoodFamily) -> None:
    family.check_outcome(dataset.y[dataset.mask])
    units = family.degenerate_groups(dataset.y, dataset.mask, axis=1)
    periods = family.degenerate_groups(dataset.y, dataset.mask, axis=0)
    if units.any() or periods.any():
        raise SeparationError(
            f"outcomes leave no finite effect for units {[dataset.unit_ids[i] for i in np.flatnonzero(units)]} "
            f"and periods {[dataset.time_ids[t] for t in np.flatnonzero(periods)]}"
        )


def _check_collinearity(dataset: PanelDataset) -> None:
    collinear = collinear_regressors(dataset)
    if collinear:
        raise SingularInformation(f"regressors {collinear} have no variation beyond the effects")


def _check_drift(dataset: PanelDataset, state: ParameterState, bound: float) -> None:
    alpha_out = np.flatnonzero(np.abs(state.alpha) > bound)
    gamma_out = np.flatnonzero(np.abs(state.gamma) > bound)
    if alpha_out.size or gamma_out.size:
        raise SeparationError(
            f"effects drifted beyond {bound:g}: units {[dataset.unit_ids[i] for i in alpha_out]}, "
            f"periods {[dataset.time_ids[t] for t in gamma_out]}"
        )


def starting_state(
    dataset: PanelDataset, family: LikelihoodFamily, normalization: Normalization = Normalization.PENALTY
) -> ParameterState:
    """beta = 0, alpha_i = link(unit mean of y), gamma = 0."""
    unit_mean = np.where(dataset.mask, dataset.y, 0.0).sum(axis=1) / dataset.mask.sum(axis=1)
    state = ParameterState(
        beta=np.zeros(dataset.K),
        alpha=np.asarray(family.link(unit_mean), dtype=float),
        gamma=np.zeros(dataset.T),
    )
    return state.renormalized(normalization)


def newton_step(
    state: ParameterState,
    dataset: PanelDataset,
    family: LikelihoodFamily,
    opts: FitOptions | None = None,
) -> ParameterState:
    """One damped Newton step from `state`.

    Returns `state` unchanged when the full step is already below `opts.tol_step` or
    no damped step keeps the objective from decreasing.
    """
    opts = opts or FitOptions(normalization=state.normalization)
    current = _evaluate(dataset, family, state, opts.penalty_b)
    step_beta, step_phi = _newton_direction(dataset, current, opts, state.normalization)
    if max(np.max(np.abs(step_beta)), np.max(np.abs(step_phi))) <= opts.tol_step:
        return state
    updated, _, _, _ = _line_search(dataset, family, state, current, step_beta, step_phi, opts)
    return updated


def fit(
    dataset: PanelDataset,
    family: LikelihoodFamily,
    opts: FitOptions | None = None,
    start: ParameterState | None = None,
) -> FitResult:
    """
    Fixed effects maximum likelihood estimate of (beta, alpha, gamma).

    Args:
        dataset: The panel.
        family: Likelihood family.
        opts: Solver options.
        start: Optional warm start; re-expressed in `opts.normalization`.

    Returns:
        A converged FitResult.

    Raises:
        SeparationError: Some unit or period has no finite effect, or effects drift
            beyond `opts.separation_bound`.
        SingularInformation: A regressor is spanned by the unit and time effects.
        NotConverged: `opts.max_iter` iterations without meeting `opts.tol_grad`.
        NumericalBreakdown: A Schur complement lost positive definiteness.
    """
    opts = opts or FitOptions()
    _check_separation(dataset, family)
    _check_collinearity(dataset)

    state = (start or starting_state(dataset, family)).renormalized(opts.normalization)
    current = _evaluate(dataset, family, state, opts.penalty_b)
    path = [current.objective]
    total_halvings = 0
    iterations = 0
    converged = current.gradient_norm <= opts.tol_grad

    while not converged and iterations < opts.max_iter:
        iterations += 1
        step_beta, step_phi = _newton_direction(dataset, current, opts, opts.normalization)
        step_size = max(np.max(np.abs(step_beta)), np.max(np.abs(step_phi)))
        state, current, halvings, accepted = _line_search(
            dataset, family, state, current, step_beta, step_phi, opts
        )
        total_halvings += halvings
        _check_drift(dataset, state, opts.separation_bound)
        path.append(current.objective)
        logger.debug(
            f"Newton iteration {iterations}: objective={current.objective:.12g}, "
            f"gradient={current.gradient_norm:.3e}, halvings={halvings}"
        )
        converged = current.gradient_norm <= opts.tol_grad
        if not accepted or step_size <= opts.tol_step:
            break

    diagnostics = {
        "iterations": iterations,
        "halvings": total_halvings,
        "gradient_norm": current.gradient_norm,
        "objective": current.objective,
    }
    if not converged:
        raise NotConverged(
            f"{family.name} fit stopped after {iterations} iterations with gradient "
            f"{current.gradient_norm:.3e} > {opts.tol_grad:g}",
            diagnostics=diagnostics,
        )

    logger.debug(f"{family.name} fit converged in {iterations} iterations, beta={state.beta}")
    return FitResult(
        state=state,
        dataset=dataset,
        family=family.name,
        loglik=current.loglik,
        objective=current.objective,
        iterations=iterations,
        halvings=total_halvings,
        gradient_norm=current.gradient_norm,
        converged=True,
        penalty_b=opts.penalty_b,
        objective_path=path,
    )


def fit_effects(
    dataset: PanelDataset,
    family: LikelihoodFamily,
    beta: np.ndarray,
    start: ParameterState | None = None,
    opts: FitOptions | None = None,
) -> ParameterState:
    """Maximize the objective over (alpha, gamma) with beta held fixed.

    Raises:
        SeparationError, NotConverged: As for `fit`.
    """
    opts = opts or FitOptions()
    _check_separation(dataset, family)
    beta = np.asarray(beta, dtype=float)
    base = start or starting_state(dataset, family)
    state = ParameterState(beta.copy(), base.alpha.copy(), base.gamma.copy(), base.normalization)
    state = state.renormalized(opts.normalization)
    current = _evaluate(dataset, family, state, opts.penalty_b)
    no_beta = np.zeros_like(beta)

    iteration = 0
    for iteration in range(1, opts.max_iter + 1):
        if current.effects_gradient_norm <= opts.tol_grad:
            return state
        h = _hessian(dataset, current, opts.penalty_b, opts.normalization)
        step_phi = solve_structured(h, current.grad_phi)
        state, current, _, accepted = _line_search(
            dataset, family, state, current, no_beta, step_phi, opts
        )
        _check_drift(dataset, state, opts.separation_bound)
        if not accepted or np.max(np.abs(step_phi)) <= opts.tol_step:
            break

    phi_norm = current.effects_gradient_norm
    if phi_norm > opts.tol_grad:
        raise NotConverged(
            f"effects at fixed beta did not converge (gradient {phi_norm:.3e})",
            diagnostics={"iterations": iteration, "gradient_norm": phi_norm},
        )
    return state
