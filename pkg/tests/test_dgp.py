"""Tests for the Monte Carlo data generating processes."""

import numpy as np
import pytest
from pydantic import ValidationError

from twofe.errors import InvalidSpec
from twofe.families import FamilyName
from twofe.simulation import DgpKind, DgpSpec, generate

SYNTHETIC_KINDS = [kind for kind in DgpKind if not kind.value.startswith("calibrated")]


class TestDgpSpec:
    """Tests for DgpSpec validation and defaults."""

    def test_defaults(self):
        """Test the default design is the static probit with 52 units and 14 periods."""
        spec = DgpSpec()
        assert spec.kind == DgpKind.STATIC_PROBIT_AR
        assert (spec.N, spec.T) == (52, 14)
        assert spec.family == FamilyName.PROBIT
        np.testing.assert_array_equal(spec.true_beta(), [1.0])

    def test_dynamic_defaults(self):
        """Test dynamic designs track two effects with one lag."""
        spec = DgpSpec(kind=DgpKind.DYNAMIC_PROBIT_AR)
        np.testing.assert_array_equal(spec.true_beta(), [0.5, 1.0])
        assert spec.default_trim == 1
        assert spec.default_effects == ["0:binary-difference", "1:continuous-derivative"]

    def test_beta_length(self):
        """Test the coefficient count must match the design."""
        with pytest.raises(ValidationError, match="takes 2 coefficients"):
            DgpSpec(kind=DgpKind.DYNAMIC_PROBIT_AR, beta=[1.0])

    def test_calibrated_needs_series(self):
        """Test calibrated designs require a series file."""
        with pytest.raises(ValidationError, match="series_path"):
            DgpSpec(kind=DgpKind.CALIBRATED_POISSON_STATIC)

    def test_too_small(self):
        """Test panels need two units."""
        with pytest.raises(ValidationError):
            DgpSpec(N=1)

    def test_unknown_field(self):
        """Test unknown fields are rejected."""
        with pytest.raises(ValidationError):
            DgpSpec(units=10)


class TestGenerate:
    """Tests for generate."""

    @pytest.mark.parametrize("kind", SYNTHETIC_KINDS)
    def test_deterministic(self, kind):
        """Test the same (seed, rep) draws the same panel and another rep does not."""
        spec = DgpSpec(kind=kind, N=8, T=6, seed=4)
        first, again, other = generate(spec, 2), generate(spec, 2), generate(spec, 3)
        assert first.dataset.equals(again.dataset)
        assert not first.dataset.equals(other.dataset)
        assert (first.dataset.N, first.dataset.T) == (8, 6)
        assert first.alpha.shape == (8,)
        assert first.gamma.shape == (6,)

    @pytest.mark.parametrize("kind", [DgpKind.DYNAMIC_PROBIT_AR, DgpKind.DYNAMIC_PROBIT_TREND])
    def test_lagged_outcome(self, kind):
        """Test the first regressor is the previous period's outcome."""
        sim = generate(DgpSpec(kind=kind, N=10, T=7), 0)
        d = sim.dataset
        assert d.regressor_names == ("y_lag", "z")
        np.testing.assert_array_equal(d.X[:, 1:, 0], d.y[:, :-1])
        assert set(np.unique(d.X[:, 0, 0])) <= {0.0, 1.0}

    @pytest.mark.parametrize(
        "kind", [DgpKind.STATIC_PROBIT_AR, DgpKind.STATIC_PROBIT_TREND, DgpKind.DYNAMIC_PROBIT_AR]
    )
    def test_binary_outcomes(self, kind):
        """Test probit designs produce 0/1 outcomes."""
        y = generate(DgpSpec(kind=kind, N=10, T=6), 1).dataset.y
        assert set(np.unique(y)) <= {0.0, 1.0}

    def test_poisson_counts(self):
        """Test the Poisson design produces non-negative integers."""
        y = generate(DgpSpec(kind=DgpKind.STATIC_POISSON_AR, N=10, T=6), 0).dataset.y
        assert np.all(y >= 0)
        np.testing.assert_array_equal(y, np.round(y))

    def test_neyman_scott_variance(self):
        """Test the Neyman-Scott errors have the requested variance."""
        sim = generate(DgpSpec(kind=DgpKind.NEYMAN_SCOTT, N=200, T=200, beta=[4.0]), 0)
        errors = sim.dataset.y - sim.alpha[:, None] - sim.gamma[None, :]
        assert errors.var() == pytest.approx(4.0, rel=0.03)
        np.testing.assert_array_equal(sim.beta, [4.0])

    def test_effect_scale(self):
        """Test effects are drawn with the configured spread."""
        sim = generate(DgpSpec(kind=DgpKind.LINEAR_AR, N=4000, T=4, sigma_alpha=0.5), 0)
        assert sim.alpha.std() == pytest.approx(0.5, rel=0.05)


class TestCalibratedDesigns:
    """Tests for the Poisson designs calibrated on a series file."""

    def test_static(self, series_csv):
        """Test the static design keeps the file's shape and uses (z, z^2)."""
        spec = DgpSpec(kind=DgpKind.CALIBRATED_POISSON_STATIC, series_path=series_csv)
        sim = generate(spec, 0)
        d = sim.dataset
        assert (d.N, d.T) == (8, 12)
        assert d.regressor_names == ("z", "z2")
        np.testing.assert_allclose(d.X[..., 1], d.X[..., 0] ** 2)
        assert spec.true_beta().shape == (2,)
        assert generate(spec, 0).dataset.equals(d)

    def test_dynamic_with_copies(self, series_csv):
        """Test the dynamic design drops the first period and stacks copies of the units."""
        spec = DgpSpec(kind=DgpKind.CALIBRATED_POISSON_DYNAMIC, series_path=series_csv, copies=2)
        sim = generate(spec, 0)
        d = sim.dataset
        assert (d.N, d.T) == (16, 11)
        assert d.regressor_names == ("log1p_y_lag", "z", "z2")
        np.testing.assert_allclose(d.X[:, 1:, 0], np.log1p(d.y[:, :-1]))
        assert spec.true_beta().shape == (3,)
        np.testing.assert_array_equal(sim.alpha[:8], sim.alpha[8:])

    def test_unbalanced_series(self, tmp_path):
        """Test a series file with missing cells is rejected."""
        path = tmp_path / "gaps.csv"
        path.write_text("id,time,z,y\n1,1,0.1,2\n1,2,0.2,3\n2,1,0.3,1\n2,2,0.1,4\n3,1,0.5,2\n")
        spec = DgpSpec(kind=DgpKind.CALIBRATED_POISSON_STATIC, series_path=path)
        with pytest.raises(InvalidSpec, match="balanced"):
            generate(spec, 0)
