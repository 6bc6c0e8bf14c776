"""Tests for structured solves with the effects block of the Hessian."""

from dataclasses import replace

import numpy as np
import pytest

from twofe.errors import NumericalBreakdown
from twofe.estimation.structured import StructuredHessian, dense_matrix, diagonal_gap, solve_structured
from twofe.models.results import Normalization


def _weights(shape, seed=0, missing=True):
    rng = np.random.default_rng(seed)
    weights = rng.uniform(0.2, 2.0, shape)
    mask = np.ones(shape, dtype=bool)
    if missing:
        mask[0, 1] = mask[2, 0] = mask[-1, -1] = False
    return weights, mask


class TestSolveStructured:
    """Tests for solve_structured against dense solves."""

    @pytest.mark.parametrize("shape", [(6, 9), (9, 6), (7, 7)])
    @pytest.mark.parametrize("penalty_b", [0.5, 1.0, 2.0])
    def test_penalty_matches_dense(self, shape, penalty_b):
        """Test the penalized solve equals a dense solve."""
        weights, mask = _weights(shape)
        h = StructuredHessian.from_weights(weights, mask=mask, penalty_b=penalty_b)
        rhs = np.random.default_rng(1).normal(size=sum(shape))
        expected = np.linalg.solve(dense_matrix(h), rhs)
        np.testing.assert_allclose(solve_structured(h, rhs), expected, rtol=1e-9, atol=1e-10)

    @pytest.mark.parametrize("shape", [(6, 9), (9, 6)])
    @pytest.mark.parametrize(
        "normalization", [Normalization.DROP_FIRST_ALPHA, Normalization.DROP_FIRST_GAMMA]
    )
    def test_drop_matches_dense(self, shape, normalization):
        """Test drop normalizations solve the reduced unpenalized system."""
        weights, mask = _weights(shape, seed=2)
        h = StructuredHessian.from_weights(weights, mask=mask, normalization=normalization)
        rhs = np.random.default_rng(3).normal(size=sum(shape))
        dropped = h.dropped_index()
        keep = np.delete(np.arange(sum(shape)), dropped)
        dense = dense_matrix(replace(h, penalty_b=0.0))[np.ix_(keep, keep)]

        solution = solve_structured(h, rhs)
        assert solution[dropped] == 0.0
        np.testing.assert_allclose(solution[keep], np.linalg.solve(dense, rhs[keep]), rtol=1e-9, atol=1e-10)

    def test_several_right_hand_sides(self):
        """Test a matrix of right-hand sides is solved column by column."""
        weights, mask = _weights((5, 8), seed=4)
        h = StructuredHessian.from_weights(weights, mask=mask)
        rhs = np.random.default_rng(5).normal(size=(13, 3))
        expected = np.linalg.solve(dense_matrix(h), rhs)
        np.testing.assert_allclose(solve_structured(h, rhs), expected, rtol=1e-9, atol=1e-10)

    def test_wrong_size(self):
        """Test a right-hand side of the wrong length is rejected."""
        h = StructuredHessian.from_weights(np.ones((3, 4)))
        with pytest.raises(ValueError, match="expected 7"):
            solve_structured(h, np.ones(6))

    def test_zero_weight_unit(self):
        """Test a unit with no weight breaks the solve."""
        weights = np.ones((3, 4))
        weights[1] = 0.0
        with pytest.raises(NumericalBreakdown):
            solve_structured(StructuredHessian.from_weights(weights), np.ones(7))


class TestDiagonalGap:
    """Tests for diagonal_gap."""

    @pytest.mark.parametrize("n", [10, 20, 40])
    def test_uniform_weights(self, n):
        """Test the gap is 1/(2n) for unit weights on an n x n panel."""
        h = StructuredHessian.from_weights(np.ones((n, n)))
        assert diagonal_gap(h) == pytest.approx(1.0 / (2 * n), rel=1e-9)

    def test_shrinks_with_panel_size(self):
        """Test the gap falls as the panel grows."""
        gaps = [diagonal_gap(StructuredHessian.from_weights(_weights((n, n), missing=False)[0])) for n in (8, 32)]
        assert gaps[1] < gaps[0]


def _diagonal_plus_constant_inverse(diag, b):
    """(diag(d) + b 1 1')^{-1} in closed form."""
    inv = 1.0 / diag
    return np.diag(inv) - np.outer(inv, inv) / (1.0 / b + inv.sum())


def _closed_form_inverse(h):
    """Block inverse of the penalized effects Hessian built from its two diagonal blocks."""
    inv_gamma = _diagonal_plus_constant_inverse(h.diag_gamma, h.penalty_b)
    coupling = h.cross - h.penalty_b
    schur_inv = np.linalg.inv(np.diag(h.diag_alpha) + h.penalty_b - coupling @ inv_gamma @ coupling.T)
    upper_right = -schur_inv @ coupling @ inv_gamma
    lower_right = inv_gamma + inv_gamma @ coupling.T @ schur_inv @ coupling @ inv_gamma
    return np.block([[schur_inv, upper_right], [upper_right.T, lower_right]]) / h.scale


class TestStructuredInverse:
    """Tests for the block structure of the inverse effects Hessian."""

    def test_diagonal_blocks_closed_form(self):
        """Test the diagonal-plus-constant inverse against a dense inverse."""
        diag = np.array([1.5, 0.7, 2.2, 0.9])
        expected = np.linalg.inv(np.diag(diag) + 0.8 * np.ones((4, 4)))
        np.testing.assert_allclose(_diagonal_plus_constant_inverse(diag, 0.8), expected, rtol=1e-12, atol=1e-14)

    def test_random_instances(self):
        """Test dense, closed-form and structured inverses agree on random panels."""
        rng = np.random.default_rng(2024)
        for _ in range(100):
            n_units, n_periods = rng.integers(2, 13, size=2)
            weights = rng.uniform(0.2, 2.0, (n_units, n_periods))
            h = StructuredHessian.from_weights(weights, penalty_b=float(rng.uniform(0.3, 3.0)))
            dense_inverse = np.linalg.inv(dense_matrix(h))
            scale = np.max(np.abs(dense_inverse))

            closed = _closed_form_inverse(h)
            structured = solve_structured(h, np.eye(n_units + n_periods))
            assert np.max(np.abs(closed - dense_inverse)) <= 1e-9 * scale
            assert np.max(np.abs(structured - dense_inverse)) <= 1e-9 * scale
            np.testing.assert_allclose(structured, structured.T, atol=1e-9 * scale)

    def test_penalty_direction(self):
        """Test v = (1_N, -1_T) is an eigenvector with eigenvalue scale * b * (N + T)."""
        h = StructuredHessian.from_weights(_weights((5, 4), missing=False)[0], penalty_b=2.0)
        v = np.concatenate([np.ones(5), -np.ones(4)])
        expected = v / (h.scale * 2.0 * 9)
        np.testing.assert_allclose(solve_structured(h, v), expected, rtol=1e-10)
