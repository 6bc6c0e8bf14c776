"""Average partial effects evaluated at fitted parameters."""

from collections.abc import Sequence

import numpy as np

from twofe.families.base import LikelihoodFamily
from twofe.families.effects import PartialEffectSpec, partial_effect_bundle
from twofe.models.panel import PanelDataset
from twofe.models.results import ApeValue, FitResult, ParameterState


def effects_at(
    dataset: PanelDataset,
    family: LikelihoodFamily,
    specs: Sequence[PartialEffectSpec],
    state: ParameterState,
) -> ApeValue:
    """Per-cell effects Delta_it(beta, alpha_i + gamma_t) and their observed-cell means.

    Raises:
        InvalidSpec: A spec names a regressor outside 0..K-1.
    """
    for spec in specs:
        spec.validate(dataset.K)
    pi = state.pi
    effects = np.stack([
        np.where(dataset.mask, partial_effect_bundle(family, spec, dataset.X, state.beta, pi).delta, 0.0)
        for spec in specs
    ]) if specs else np.zeros((0, dataset.N, dataset.T))
    delta = effects.sum(axis=(1, 2)) / dataset.n_obs
    return ApeValue(delta=delta, effects=effects, beta=state.beta.copy(), specs=list(specs))


def compute_ape(
    fit: FitResult,
    family: LikelihoodFamily,
    specs: Sequence[PartialEffectSpec],
    state: ParameterState | None = None,
) -> ApeValue:
    """Average partial effects at the fit, or at another `state` on the same panel."""
    return effects_at(fit.dataset, family, specs, state or fit.state)
