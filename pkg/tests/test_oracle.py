"""Tests for the Neyman-Scott oracle."""

import numpy as np
import pytest

from twofe.errors import InvalidSpec
from twofe.simulation import TABLE_CELLS, OracleRow, neyman_scott_estimates, neyman_scott_oracle, two_way_ssr
from twofe.simulation.oracle import analytic_rows, chi_square_coverage, simulated_rows

# Coverage of 95% intervals by (N, T): FE and analytically corrected
COVERAGE = {
    (10, 10): (0.56, 0.89),
    (25, 10): (0.55, 0.92),
    (25, 25): (0.65, 0.93),
    (50, 10): (0.44, 0.92),
    (50, 25): (0.63, 0.94),
    (50, 50): (0.68, 0.94),
}


def _by_name(rows):
    return {row.estimator: row for row in rows}


class TestAnalyticRows:
    """Tests for the closed-form oracle rows."""

    def test_ten_by_ten(self):
        """Test bias and spread of the 10 x 10 cell."""
        rows = _by_name(analytic_rows(10, 10, 0.95))
        assert rows["FE"].bias == pytest.approx(-0.19)
        assert rows["FE"].sd == pytest.approx(np.sqrt(162) / 100)
        assert rows["A"].bias == pytest.approx(1.2 * 0.81 - 1.0)
        assert rows["A"].sd == pytest.approx(0.153, abs=5e-4)
        assert rows["J"].bias == pytest.approx(-0.01)
        assert rows["unbiased"].bias == 0.0
        assert np.isnan(rows["J"].sd)

    @pytest.mark.parametrize("cell", TABLE_CELLS)
    def test_coverage_table(self, cell):
        """Test interval coverage at the standard cells to two decimals."""
        rows = _by_name(analytic_rows(*cell, 0.95))
        fe, analytical = COVERAGE[cell]
        assert rows["FE"].coverage == pytest.approx(fe, abs=0.01)
        assert rows["A"].coverage == pytest.approx(analytical, abs=0.01)
        assert rows["FE"].coverage < rows["A"].coverage < 0.95

    def test_unbiased_coverage(self):
        """Test the degrees-of-freedom corrected estimator at 10 x 10."""
        assert _by_name(analytic_rows(10, 10))["unbiased"].coverage == pytest.approx(0.91, abs=0.01)

    def test_coverage_grows_with_level(self):
        """Test wider intervals cover more often."""
        assert chi_square_coverage(25, 25, 1.0, 0.99) > chi_square_coverage(25, 25, 1.0, 0.95)

    def test_invalid_cell(self):
        """Test cells with fewer than two units are rejected."""
        with pytest.raises(InvalidSpec):
            analytic_rows(1, 10)

    def test_row_round_trip(self):
        """Test rows convert to and from dictionaries."""
        row = analytic_rows(10, 10)[0]
        restored = OracleRow.from_dict(row.to_dict())
        assert (restored.estimator, restored.N, restored.T, restored.bias) == ("FE", 10, 10, row.bias)
        assert restored.coverage == row.coverage


class TestEstimates:
    """Tests for the Neyman-Scott estimators on simulated data."""

    def test_two_way_ssr(self):
        """Test the sum of squares ignores additive effects."""
        rng = np.random.default_rng(0)
        noise = rng.normal(size=(6, 5))
        shifted = noise + rng.normal(size=(6, 1)) + rng.normal(size=(1, 5))
        assert two_way_ssr(shifted) == pytest.approx(two_way_ssr(noise))

    def test_batched_shapes(self):
        """Test estimates keep the leading batch axes."""
        estimates = neyman_scott_estimates(np.random.default_rng(1).normal(size=(3, 8, 6)))
        assert set(estimates) == {"FE", "A", "J", "J2"}
        assert all(values.shape == (3,) for values in estimates.values())
        np.testing.assert_allclose(estimates["A"], (1 + 1 / 8 + 1 / 6) * estimates["FE"])

    def test_simulated_rows_match_theory(self):
        """Test simulated FE bias and coverage agree with the closed form."""
        rows = _by_name(simulated_rows(10, 10, reps=20_000, seed=1))
        theory = _by_name(analytic_rows(10, 10))
        fe = rows["FE"]
        assert fe.source == "simulated"
        assert fe.reps == 20_000
        assert abs(fe.bias - theory["FE"].bias) < 4 * fe.mc_se
        assert fe.coverage == pytest.approx(theory["FE"].coverage, abs=0.02)
        assert fe.sd == pytest.approx(theory["FE"].sd, rel=0.05)

    def test_jackknife_bias(self):
        """Test the jackknife leaves -1/NT and the second-order jackknife leaves none."""
        rows = _by_name(simulated_rows(10, 10, reps=20_000, seed=2))
        assert abs(rows["J"].bias + 0.01) < 4 * rows["J"].mc_se
        assert abs(rows["J2"].bias) < 4 * rows["J2"].mc_se

    def test_simulated_rows_need_two_reps(self):
        """Test at least two replications are required."""
        with pytest.raises(InvalidSpec):
            simulated_rows(10, 10, reps=1)

    def test_oracle_combines_rows(self):
        """Test the oracle appends simulated rows on request."""
        rows = neyman_scott_oracle(10, 10, simulate=True, reps=200, seed=0)
        assert [r.source for r in rows].count("analytic") == 4
        assert [r.source for r in rows].count("simulated") == 4
        assert all(r.source == "analytic" for r in neyman_scott_oracle(10, 10))
