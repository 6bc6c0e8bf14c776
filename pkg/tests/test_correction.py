"""Tests for the analytical bias corrections."""

import numpy as np
import pytest

from twofe.errors import InvalidSpec, InvalidTrim
from twofe.estimation import (
    analytical_correct,
    ape_correction,
    compute_ape,
    estimate_B,
    estimate_D,
    estimate_W,
    fit,
)
from twofe.estimation.correction import bias_corrected, lag_sum, normal_quantile
from twofe.families import PartialEffectSpec, get_family, partial_effect_bundle
from twofe.models import PanelDataset, VarianceMode


@pytest.fixture(scope="module")
def gaussian_fit(gaussian_panel):
    """Fit the linear panel."""
    return fit(gaussian_panel, get_family("gaussian"))


@pytest.fixture(scope="module")
def probit_fit(probit_panel):
    """Fit the probit panel."""
    return fit(probit_panel, get_family("probit"))


def _weighted_fitted(weights, target, mask):
    """Weighted least squares fit of target by unit and period dummies."""
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


def _derivatives(fit_result, family):
    """Likelihood derivatives at the fit and the dense projection Xi of the first regressor."""
    d = fit_result.dataset
    bundle = family.loglik_bundle(d.y, d.X, fit_result.beta, fit_result.pi_hat)
    xi = _weighted_fitted(-bundle.d_pi2, bundle.d_beta_pi[..., 0] / bundle.d_pi2, d.mask)
    return d, bundle, xi


def _loop_lag_sum(lead, lagged, mask, i, trim):
    n_periods = mask.shape[1]
    total = 0.0
    for j in range(trim + 1):
        pairs = [t for t in range(j, n_periods) if mask[i, t - j] and mask[i, t]]
        if pairs:
            factor = mask[i].sum() / len(pairs)
            total += factor * sum(lead[i, t - j] * lagged[i, t] for t in pairs)
    return total


class TestPlugIns:
    """Tests for the W, B and lag-sum building blocks."""

    def test_gaussian_information(self, gaussian_fit, gaussian_panel):
        """Test W for the linear model is the mean square of the demeaned regressor."""
        x = gaussian_panel.X[..., 0]
        within = x - x.mean(axis=1, keepdims=True) - x.mean(axis=0, keepdims=True) + x.mean()
        W = estimate_W(gaussian_fit, get_family("gaussian"))
        assert W.shape == (1, 1)
        assert W[0, 0] == pytest.approx((within**2).sum() / gaussian_panel.n_obs, rel=1e-8)

    def test_lag_sum_balanced_factor(self):
        """Test each lag is rescaled by T / (T - j) on a balanced panel."""
        ones = np.ones((2, 4))
        mask = np.ones((2, 4), dtype=bool)
        np.testing.assert_allclose(lag_sum(ones, ones, mask, trim=0), [4.0, 4.0])
        np.testing.assert_allclose(lag_sum(ones, ones, mask, trim=1), [8.0, 8.0])

    def test_lag_sum_pairs_only(self):
        """Test lag products skip pairs with a missing cell."""
        lead = np.array([[1.0, 2.0, 3.0, 4.0]])
        mask = np.array([[True, True, False, True]])
        # j = 0: 1 + 4 + 16 = 21; j = 1: one observed pair (1 * 2) scaled by 3 / 1
        np.testing.assert_allclose(lag_sum(lead, lead, mask, trim=1), [27.0])

    @pytest.mark.parametrize("trim", [-1, 9])
    def test_invalid_trim(self, gaussian_fit, trim):
        """Test trims outside [0, T - 2] are rejected."""
        with pytest.raises(InvalidTrim, match="must lie in \\[0, 6\\]"):
            estimate_B(gaussian_fit, get_family("gaussian"), trim)

    def test_gaussian_bias_ignores_bartlett(self, gaussian_fit):
        """Test both bias expressions agree when the third derivative vanishes."""
        family = get_family("gaussian")
        np.testing.assert_allclose(
            estimate_B(gaussian_fit, family, 1), estimate_B(gaussian_fit, family, 1, no_bartlett=True)
        )


class TestAnalyticalCorrect:
    """Tests for analytical_correct."""

    def test_bias_corrected_formula(self):
        """Test beta_tilde = beta_hat - W^-1 B / T - W^-1 D / N."""
        W = np.array([[2.0, 0.5], [0.5, 1.0]])
        B = np.array([1.0, -1.0])
        D = np.array([0.5, 0.25])
        beta = np.array([1.0, 2.0])
        expected = beta - np.linalg.solve(W, B) / 10 - np.linalg.solve(W, D) / 20
        np.testing.assert_allclose(bias_corrected(beta, W, B, D, 10, 20), expected)

    def test_result_fields(self, probit_fit):
        """Test the corrected estimate, variance and interval fit together."""
        result = analytical_correct(probit_fit, get_family("probit"), trim=0)
        W_inv = np.linalg.inv(result.W_hat)
        n_obs = probit_fit.dataset.n_obs
        expected = bias_corrected(
            probit_fit.beta, result.W_hat, result.B_hat, result.D_hat,
            n_obs / probit_fit.dataset.N, n_obs / probit_fit.dataset.T,
        )
        np.testing.assert_allclose(result.beta_tilde_A, expected)
        np.testing.assert_allclose(result.vcov, W_inv / n_obs)
        np.testing.assert_allclose(result.vcov, result.vcov.T)
        half_width = normal_quantile(0.95) * result.se
        np.testing.assert_allclose(result.ci_upper - result.beta_tilde_A, half_width)
        np.testing.assert_allclose(result.beta_tilde_A - result.ci_lower, half_width)
        assert result.trim_L == 0

    def test_sandwich_variance(self, probit_fit):
        """Test the no-bartlett variance is a positive sandwich."""
        result = analytical_correct(probit_fit, get_family("probit"), trim=0, no_bartlett=True)
        assert result.no_bartlett
        assert np.all(result.se > 0)

    def test_normal_quantile(self):
        """Test the two-sided critical value."""
        assert normal_quantile(0.95) == pytest.approx(1.959964, abs=1e-6)
        assert normal_quantile(0.90) == pytest.approx(1.644854, abs=1e-6)


class TestApeCorrection:
    """Tests for ape_correction."""

    def test_linear_effect_is_the_coefficient(self, gaussian_fit):
        """Test the linear derivative effect has no own bias and tracks beta_tilde."""
        family = get_family("gaussian")
        spec = PartialEffectSpec.parse("0:continuous-derivative")
        correction = analytical_correct(gaussian_fit, family, trim=0)
        result = ape_correction(gaussian_fit, family, [spec], 0, correction=correction)
        np.testing.assert_allclose(result.B_delta, 0.0, atol=1e-12)
        np.testing.assert_allclose(result.D_delta, 0.0, atol=1e-12)
        assert result.delta_hat[0] == pytest.approx(gaussian_fit.beta[0])
        assert result.delta_tilde_A[0] == pytest.approx(correction.beta_tilde_A[0])

    def test_no_specs(self, gaussian_fit):
        """Test an empty effect list is rejected."""
        with pytest.raises(InvalidSpec, match="no partial effect"):
            ape_correction(gaussian_fit, get_family("gaussian"), [], 0)

    def test_spec_out_of_range(self, gaussian_fit):
        """Test effects must name an existing regressor."""
        with pytest.raises(InvalidSpec):
            ape_correction(gaussian_fit, get_family("gaussian"), [PartialEffectSpec.parse("3:continuous-derivative")], 0)

    def test_unit_sampling_matches_conditional(self, probit_fit):
        """Test the conditional and iid-units variances are the same estimator."""
        family = get_family("probit")
        specs = [PartialEffectSpec.parse(text) for text in ("0:continuous-derivative", "0:binary-difference")]
        correction = analytical_correct(probit_fit, family, trim=0)
        conditional, units = (
            ape_correction(probit_fit, family, specs, 0, mode, correction=correction)
            for mode in (VarianceMode.CONDITIONAL, VarianceMode.IID_UNITS)
        )
        np.testing.assert_array_equal(conditional.V_delta, units.V_delta)
        assert conditional.se[0] > 0
        assert np.isfinite(conditional.B_delta[0]) and np.isfinite(conditional.D_delta[0])

    @pytest.mark.parametrize("mode", [VarianceMode.CONDITIONAL, VarianceMode.IID_UNITS])
    def test_variance_against_cell_loop(self, probit_fit, mode):
        """Test the APE standard error against influence terms and unit sums built cell by cell."""
        family = get_family("probit")
        spec = PartialEffectSpec.parse("0:continuous-derivative")
        d, bundle, xi = _derivatives(probit_fit, family)
        effect = partial_effect_bundle(family, spec, d.X, probit_fit.beta, probit_fit.pi_hat)
        psi = _weighted_fitted(-bundle.d_pi2, effect.d_pi / bundle.d_pi2, d.mask)
        correction = analytical_correct(probit_fit, family, trim=0)
        effects = compute_ape(probit_fit, family, [spec]).effects[0]

        cells = [(i, t) for i in range(d.N) for t in range(d.T) if d.mask[i, t]]
        n_obs = len(cells)
        effect_score = sum(effect.d_beta[i, t, 0] - effect.d_pi[i, t] * xi[i, t] for i, t in cells) / n_obs
        period_mean = [np.mean([effects[i, t] for i in range(d.N) if d.mask[i, t]]) for t in range(d.T)]

        total = 0.0
        for i in range(d.N):
            unit_sum = 0.0
            for t in range(d.T):
                if not d.mask[i, t]:
                    continue
                score = bundle.d_beta[i, t, 0] - bundle.d_pi[i, t] * xi[i, t]
                influence = score * effect_score / correction.W_hat[0, 0] - psi[i, t] * bundle.d_pi[i, t]
                total += influence**2
                unit_sum += effects[i, t] - period_mean[t]
            total += unit_sum**2

        result = ape_correction(probit_fit, family, [spec], 0, mode, correction=correction)
        assert result.se[0] == pytest.approx(np.sqrt(total) / n_obs, rel=1e-6)


class TestCellLoops:
    """Tests for W, B, D and the APE bias terms against cell-by-cell loops on a probit fit."""

    def test_information(self, probit_fit):
        """Test W against a loop over observed cells."""
        family = get_family("probit")
        d, bundle, xi = _derivatives(probit_fit, family)
        total = 0.0
        for i in range(d.N):
            for t in range(d.T):
                if d.mask[i, t]:
                    total -= bundle.d_beta_beta[i, t, 0, 0] - bundle.d_pi2[i, t] * xi[i, t] ** 2
        assert estimate_W(probit_fit, family)[0, 0] == pytest.approx(total / d.n_obs, rel=1e-7)

    def test_time_effect_bias(self, probit_fit):
        """Test D against per-period loops."""
        family = get_family("probit")
        d, bundle, xi = _derivatives(probit_fit, family)
        terms = []
        for t in range(d.T):
            numerator = denominator = 0.0
            for i in range(d.N):
                if not d.mask[i, t]:
                    continue
                projected = bundle.d_beta_pi[i, t, 0] - bundle.d_pi2[i, t] * xi[i, t]
                curvature = bundle.d_beta_pi2[i, t, 0] - bundle.d_pi3[i, t] * xi[i, t]
                numerator += bundle.d_pi[i, t] * projected + 0.5 * curvature
                denominator += bundle.d_pi2[i, t]
            terms.append(numerator / denominator)
        assert estimate_D(probit_fit, family)[0] == pytest.approx(-np.mean(terms), rel=1e-6, abs=1e-10)

    @pytest.mark.parametrize("trim", [0, 2])
    def test_unit_effect_bias(self, probit_fit, trim):
        """Test B against per-unit loops with trimmed lag sums."""
        family = get_family("probit")
        d, bundle, xi = _derivatives(probit_fit, family)
        projected = bundle.d_beta_pi[..., 0] - bundle.d_pi2 * xi
        terms = []
        for i in range(d.N):
            observed = [t for t in range(d.T) if d.mask[i, t]]
            spectral = _loop_lag_sum(bundle.d_pi, projected, d.mask, i, trim)
            curvature = sum(bundle.d_beta_pi2[i, t, 0] - bundle.d_pi3[i, t] * xi[i, t] for t in observed)
            denominator = sum(bundle.d_pi2[i, t] for t in observed)
            terms.append((spectral + 0.5 * curvature) / denominator)
        assert estimate_B(probit_fit, family, trim)[0] == pytest.approx(-np.mean(terms), rel=1e-6, abs=1e-10)

    def test_ape_bias_terms(self, probit_fit):
        """Test the effect-level bias terms against per-unit and per-period loops."""
        family = get_family("probit")
        spec = PartialEffectSpec.parse("0:continuous-derivative")
        d, bundle, _ = _derivatives(probit_fit, family)
        effect = partial_effect_bundle(family, spec, d.X, probit_fit.beta, probit_fit.pi_hat)
        psi = _weighted_fitted(-bundle.d_pi2, effect.d_pi / bundle.d_pi2, d.mask)
        curvature = effect.d_pi2 - bundle.d_pi3 * psi

        unit_terms = []
        for i in range(d.N):
            observed = [t for t in range(d.T) if d.mask[i, t]]
            spectral = _loop_lag_sum(bundle.d_pi, bundle.d_pi2 * psi, d.mask, i, 1)
            denominator = sum(bundle.d_pi2[i, t] for t in observed)
            unit_terms.append((spectral - 0.5 * sum(curvature[i, t] for t in observed)) / denominator)
        period_terms = []
        for t in range(d.T):
            observed = [i for i in range(d.N) if d.mask[i, t]]
            numerator = sum(
                bundle.d_pi[i, t] * bundle.d_pi2[i, t] * psi[i, t] - 0.5 * curvature[i, t] for i in observed
            )
            period_terms.append(numerator / sum(bundle.d_pi2[i, t] for i in observed))

        result = ape_correction(probit_fit, family, [spec], 1)
        assert result.B_delta[0] == pytest.approx(np.mean(unit_terms), rel=1e-6, abs=1e-10)
        assert result.D_delta[0] == pytest.approx(np.mean(period_terms), rel=1e-6, abs=1e-10)


def _maskable_cells(panel, count):
    """Mask up to `count` cells, one per unit, keeping both outcomes in every unit and period."""
    mask = np.array(panel.mask)
    chosen = 0
    for i in range(panel.N):
        for t in range(i % panel.T, panel.T):
            trial = mask.copy()
            trial[i, t] = False
            row = panel.y[i][trial[i]]
            column = panel.y[:, t][trial[:, t]]
            if 0.0 < row.mean() < 1.0 and 0.0 < column.mean() < 1.0:
                mask = trial
                chosen += 1
                break
        if chosen == count:
            break
    return mask


def _with_mask(panel, mask, y_fill=None, x_fill=None):
    y = np.array(panel.y)
    X = np.array(panel.X)
    if y_fill is not None:
        y[~mask] = y_fill
    if x_fill is not None:
        X[~mask] = x_fill
    return PanelDataset(panel.unit_ids, panel.time_ids, y, X, mask, panel.regressor_names)


class TestMaskedCells:
    """Tests that values on missing cells never reach the estimates."""

    def test_poisoned_cells_change_nothing(self, probit_panel):
        """Test NaN and infinite values on missing cells give bit-identical results."""
        family = get_family("probit")
        mask = _maskable_cells(probit_panel, 6)
        assert (~mask).sum() == 6
        clean = _with_mask(probit_panel, mask)
        poisoned = _with_mask(probit_panel, mask, y_fill=np.nan, x_fill=np.inf)
        assert clean.equals(poisoned)

        fits = [fit(panel, family) for panel in (clean, poisoned)]
        np.testing.assert_array_equal(fits[0].beta, fits[1].beta)
        np.testing.assert_array_equal(fits[0].pi_hat, fits[1].pi_hat)

        corrections = [analytical_correct(f, family, trim=1) for f in fits]
        for name in ("W_hat", "B_hat", "D_hat", "beta_tilde_A", "vcov"):
            np.testing.assert_array_equal(getattr(corrections[0], name), getattr(corrections[1], name))

        spec = [PartialEffectSpec.parse("0:continuous-derivative")]
        apes = [ape_correction(f, family, spec, 1, correction=c) for f, c in zip(fits, corrections, strict=True)]
        np.testing.assert_array_equal(apes[0].delta_tilde_A, apes[1].delta_tilde_A)
        np.testing.assert_array_equal(apes[0].V_delta, apes[1].V_delta)
        assert np.all(np.isfinite(apes[0].V_delta))
