"""Tests for average partial effects at fitted parameters."""

import numpy as np
import pytest

from twofe.errors import InvalidSpec
from twofe.estimation import FitOptions, compute_ape, fit
from twofe.families import PartialEffectSpec, get_family
from twofe.models import FitResult, Normalization, PanelDataset, ParameterState

SPECS = [PartialEffectSpec.parse("0:continuous-derivative"), PartialEffectSpec.parse("0:binary-difference")]


@pytest.fixture(scope="module")
def probit_fit(probit_panel):
    """Fit the probit panel."""
    return fit(probit_panel, get_family("probit"))


def _zero_index_fit():
    """A 3 x 4 probit panel whose index x'beta + pi is zero on every cell."""
    rng = np.random.default_rng(4)
    z = rng.normal(size=(3, 4))
    mask = np.ones((3, 4), dtype=bool)
    mask[2, 1] = False
    dataset = PanelDataset(
        unit_ids=("a", "b", "c"),
        time_ids=("1", "2", "3", "4"),
        y=rng.integers(0, 2, (3, 4)),
        X=np.stack([z, -z], axis=-1),
        mask=mask,
    )
    state = ParameterState(beta=np.array([1.0, 1.0]), alpha=np.zeros(3), gamma=np.zeros(4))
    return FitResult(state=state, dataset=dataset, family="probit")


class TestComputeApe:
    """Tests for compute_ape."""

    def test_derivative_at_zero_index(self):
        """Test the probit derivative effect is beta_k * phi(0) when every index is zero."""
        result = compute_ape(_zero_index_fit(), get_family("probit"), [SPECS[0]])
        assert result.delta[0] == pytest.approx(0.398942, abs=1e-6)
        assert result.effects.shape == (1, 3, 4)
        assert result.effects[0, 2, 1] == 0.0

    def test_mean_over_observed_cells(self, probit_fit):
        """Test delta is the observed-cell mean of the per-cell effects."""
        result = compute_ape(probit_fit, get_family("probit"), SPECS)
        mask = probit_fit.dataset.mask
        for s in range(len(SPECS)):
            assert result.delta[s] == pytest.approx(result.effects[s][mask].mean(), rel=1e-12)

    @pytest.mark.parametrize("shift", [-1.1, 0.4])
    def test_effect_level_shift(self, probit_fit, shift):
        """Test effects do not change when alpha moves by c and gamma by -c."""
        family = get_family("probit")
        state = probit_fit.state
        moved = ParameterState(state.beta.copy(), state.alpha + shift, state.gamma - shift)
        np.testing.assert_allclose(
            compute_ape(probit_fit, family, SPECS, state=moved).delta,
            compute_ape(probit_fit, family, SPECS).delta,
            atol=1e-12,
        )

    @pytest.mark.parametrize("normalization", [Normalization.DROP_FIRST_ALPHA, Normalization.DROP_FIRST_GAMMA])
    def test_normalization_invariance(self, probit_panel, normalization):
        """Test effects agree between the penalized and a drop-normalized fit."""
        family = get_family("probit")
        reference = fit(probit_panel, family, FitOptions(tol_grad=1e-10, tol_step=0.0))
        other = fit(probit_panel, family, FitOptions(tol_grad=1e-10, tol_step=0.0, normalization=normalization))
        np.testing.assert_allclose(
            compute_ape(other, family, SPECS).delta, compute_ape(reference, family, SPECS).delta, atol=1e-6
        )

    def test_invalid_spec(self, probit_fit):
        """Test effects on a regressor the panel lacks are rejected."""
        with pytest.raises(InvalidSpec):
            compute_ape(probit_fit, get_family("probit"), [PartialEffectSpec.parse("5:continuous-derivative")])
