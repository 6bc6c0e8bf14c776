"""Tests for the weighted two-way projection."""

from dataclasses import replace

import numpy as np
import pytest

from twofe.errors import DegenerateProjection
from twofe.estimation import fit, project, psi_hat, xi_hat
from twofe.estimation.projection import psi_from
from twofe.estimation.structured import StructuredHessian, dense_matrix
from twofe.families import PartialEffectSpec, get_family, partial_effect_bundle
from twofe.models import ParameterState


def _dense_fitted(weights, target, mask):
    rows, cols = np.nonzero(mask)
    n_units, n_periods = mask.shape
    design = np.zeros((rows.size, n_units + n_periods))
    design[np.arange(rows.size), rows] = 1.0
    design[np.arange(rows.size), n_units + cols] = 1.0
    root = np.sqrt(weights[rows, cols])
    coef, *_ = np.linalg.lstsq(design * root[:, None], target[rows, cols] * root, rcond=None)
    fitted = np.zeros(mask.shape)
    fitted[rows, cols] = design @ coef
    return fitted


@pytest.fixture
def problem():
    """Random weights and target on a 7 x 5 grid with missing cells."""
    rng = np.random.default_rng(0)
    mask = np.ones((7, 5), dtype=bool)
    mask[0, 0] = mask[3, 2] = mask[6, 4] = False
    return rng.uniform(0.5, 3.0, (7, 5)), rng.normal(size=(7, 5)), mask


class TestProject:
    """Tests for project."""

    def test_matches_weighted_least_squares(self, problem):
        """Test alternating means reach the weighted least squares fit."""
        weights, target, mask = problem
        result = project(weights, target, mask=mask, tol=1e-14)
        np.testing.assert_allclose(result.fitted, _dense_fitted(weights, target, mask), atol=1e-10)

    def test_direct_fallback(self, problem):
        """Test the direct solve gives the same fit when sweeps run out."""
        weights, target, mask = problem
        result = project(weights, target, mask=mask, max_sweeps=1)
        assert result.method == "direct"
        np.testing.assert_allclose(result.fitted, _dense_fitted(weights, target, mask), atol=1e-10)

    def test_normalization(self, problem):
        """Test coefficients satisfy sum(a) == sum(g)."""
        weights, target, mask = problem
        result = project(weights, target, mask=mask)
        assert result.a.sum() == pytest.approx(result.g.sum(), abs=1e-10)

    def test_residuals_orthogonal(self, problem):
        """Test weighted residuals sum to zero within every unit and period."""
        weights, target, mask = problem
        result = project(weights, target, mask=mask, tol=1e-14)
        weighted = np.where(mask, weights, 0.0) * result.residuals
        np.testing.assert_allclose(weighted.sum(axis=1), 0.0, atol=1e-10)
        np.testing.assert_allclose(weighted.sum(axis=0), 0.0, atol=1e-10)
        assert np.all(result.residuals[~mask] == 0.0)

    def test_additive_target_is_exact(self):
        """Test a target already of the form a_i + g_t has zero residuals."""
        a = np.array([1.0, -2.0, 0.5])
        g = np.array([0.3, 0.1, -0.4, 2.0])
        result = project(np.ones((3, 4)), a[:, None] + g[None, :])
        np.testing.assert_allclose(result.residuals, 0.0, atol=1e-12)

    def test_zero_weight_period(self):
        """Test a period without weight raises DegenerateProjection."""
        weights = np.ones((3, 3))
        weights[:, 1] = 0.0
        with pytest.raises(DegenerateProjection):
            project(weights, np.ones((3, 3)), mask=np.ones((3, 3), dtype=bool))


class TestXiHat:
    """Tests for xi_hat."""

    def test_gaussian_xi_is_unweighted_projection(self, gaussian_panel):
        """Test Xi for the linear model is the two-way projection of the regressor."""
        family = get_family("gaussian")
        result = fit(gaussian_panel, family)
        expected = project(np.ones((gaussian_panel.N, gaussian_panel.T)), gaussian_panel.X[..., 0]).fitted
        np.testing.assert_allclose(xi_hat(result, family, k=0), expected, atol=1e-9)
        assert xi_hat(result, family).shape == (gaussian_panel.N, gaussian_panel.T, 1)


@pytest.fixture(scope="module")
def probit_fit(probit_panel):
    """Fit the probit panel."""
    return fit(probit_panel, get_family("probit"))


def _hessian_fitted(fit_result, target):
    """Fitted values a_i + g_t from the penalized dense effects Hessian."""
    d = fit_result.dataset
    bundle = get_family("probit").loglik_bundle(d.y, d.X, fit_result.beta, fit_result.pi_hat)
    weights = np.where(d.mask, -bundle.d_pi2, 0.0)
    h = StructuredHessian.from_weights(weights, mask=d.mask, penalty_b=1.0, scale=1.0)
    weighted = weights * np.where(d.mask, target, 0.0)
    rhs = np.concatenate([weighted.sum(axis=1), weighted.sum(axis=0)])
    coef = np.linalg.solve(dense_matrix(h), rhs)
    return np.where(d.mask, coef[: d.N, None] + coef[None, d.N :], 0.0)


class TestPsiHat:
    """Tests for psi_hat and psi_from."""

    @pytest.mark.parametrize("text", ["0:continuous-derivative", "0:binary-difference"])
    def test_matches_dense_hessian(self, probit_fit, text):
        """Test Psi equals the projection computed with the dense Hessian inverse."""
        family = get_family("probit")
        d = probit_fit.dataset
        spec = PartialEffectSpec.parse(text)
        bundle = family.loglik_bundle(d.y, d.X, probit_fit.beta, probit_fit.pi_hat)
        effect = partial_effect_bundle(family, spec, d.X, probit_fit.beta, probit_fit.pi_hat)
        target = np.where(d.mask, effect.d_pi / bundle.d_pi2, 0.0)
        expected = _hessian_fitted(probit_fit, target)
        np.testing.assert_allclose(psi_hat(probit_fit, family, spec), expected, atol=1e-8)

    def test_psi_from_agrees_with_psi_hat(self, probit_fit):
        """Test psi_from on the effect derivative reproduces psi_hat."""
        family = get_family("probit")
        d = probit_fit.dataset
        spec = PartialEffectSpec.parse("0:continuous-derivative")
        effect = partial_effect_bundle(family, spec, d.X, probit_fit.beta, probit_fit.pi_hat)
        d_pi = np.where(d.mask, effect.d_pi, 0.0)
        np.testing.assert_allclose(psi_from(probit_fit, family, d_pi), psi_hat(probit_fit, family, spec), atol=1e-12)

    @pytest.mark.parametrize("shift", [-0.7, 1.3])
    def test_effect_level_shift(self, probit_fit, shift):
        """Test Psi does not change when alpha moves by c and gamma by -c."""
        family = get_family("probit")
        spec = PartialEffectSpec.parse("0:continuous-derivative")
        state = probit_fit.state
        moved = replace(
            probit_fit,
            state=ParameterState(state.beta.copy(), state.alpha + shift, state.gamma - shift, state.normalization),
        )
        np.testing.assert_allclose(psi_hat(moved, family, spec), psi_hat(probit_fit, family, spec), atol=1e-9)
