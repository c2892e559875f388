"""Feature maps of the basis policy classes."""
import numpy as np
import pytest

from dtrlab.errors import StageMismatchError
from dtrlab.features import (
    feature_dim, featurize_matrix, fit_meta, natural_cubic_basis, wavelet_basis,
)
from dtrlab.models.specs import PolicyClass

KNOTS = [0.25, 0.5, 0.75]


class TestLinear:
    def test_stage_one(self):
        meta = fit_meta(PolicyClass.LINEAR, 1, np.zeros((1, 2)), p1=2, p2=1)
        np.testing.assert_array_equal(featurize_matrix([[2.0, 3.0]], meta), [[1.0, 2.0, 3.0]])

    def test_stage_two_interactions(self):
        meta = fit_meta(PolicyClass.LINEAR, 2, np.zeros((1, 4)), p1=1, p2=1)
        x, y1, z, a1 = 2.0, 3.0, 5.0, -1.0
        np.testing.assert_array_equal(
            featurize_matrix([[x, y1, z, a1]], meta), [[1.0, x, y1, z, a1, x * z, x * a1]]
        )

    def test_dimension_is_declared(self):
        meta = fit_meta(PolicyClass.LINEAR, 2, np.zeros((3, 8)), p1=3, p2=3)
        assert feature_dim(meta) == 1 + 8 + 9 + 3

    def test_wrong_width(self):
        meta = fit_meta(PolicyClass.LINEAR, 1, np.zeros((1, 2)), p1=2, p2=1)
        with pytest.raises(StageMismatchError):
            featurize_matrix([[1.0, 2.0, 3.0]], meta)

    def test_fit_rejects_wrong_stage_width(self):
        with pytest.raises(StageMismatchError):
            fit_meta(PolicyClass.SPLINE, 2, np.zeros((5, 2)), p1=2, p2=1)


class TestNaturalSpline:
    @pytest.mark.parametrize("knot", KNOTS)
    def test_smooth_through_knots(self, knot):
        h = 1e-4
        u = knot + h * np.arange(-2, 3)
        b = natural_cubic_basis(u, KNOTS)
        # value, first and second derivative from each side agree up to O(h)
        np.testing.assert_allclose(b[2], (b[1] + b[3]) / 2.0, atol=1e-6)
        left = (b[2] - b[1]) / h
        right = (b[3] - b[2]) / h
        np.testing.assert_allclose(left, right, atol=1e-2)
        left2 = (b[2] - 2 * b[1] + b[0]) / h ** 2
        right2 = (b[4] - 2 * b[3] + b[2]) / h ** 2
        np.testing.assert_allclose(left2, right2, atol=1e-2)

    @pytest.mark.parametrize("u0", [0.05, 0.9])
    def test_linear_beyond_boundary_knots(self, u0):
        h = 1e-3
        b = natural_cubic_basis(u0 + h * np.arange(3), KNOTS)
        np.testing.assert_allclose((b[2] - 2 * b[1] + b[0]) / h ** 2, 0.0, atol=1e-6)

    def test_zero_input(self):
        np.testing.assert_array_equal(natural_cubic_basis(np.zeros(1), KNOTS), np.zeros((1, 2)))

    def test_binary_columns_enter_linearly(self):
        rng = np.random.default_rng(0)
        H = np.column_stack([rng.standard_normal(50), rng.choice([-1.0, 1.0], 50)])
        meta = fit_meta(PolicyClass.SPLINE, 1, H, p1=2, p2=1)
        assert meta.binary == [False, True]
        assert meta.knots[1] == []
        X = featurize_matrix(H, meta)
        np.testing.assert_array_equal(X[:, -1], H[:, 1])
        assert X.shape[1] == 1 + len(KNOTS) - 1 + 1

    def test_tied_quartiles_fall_back(self):
        H = np.concatenate([np.zeros(97), [1.0, 2.0, 3.0]])[:, None]
        meta = fit_meta(PolicyClass.SPLINE, 1, H, p1=1, p2=1)
        assert meta.knots[0] == KNOTS

    def test_knots_are_training_quartiles(self):
        H = np.linspace(-4.0, 4.0, 101)[:, None]
        meta = fit_meta(PolicyClass.SPLINE, 1, H, p1=1, p2=1)
        np.testing.assert_allclose(meta.knots[0], KNOTS, atol=1e-12)
        assert (meta.lower, meta.upper) == ([-4.0], [4.0])


class TestWavelet:
    def test_clipped_to_unit_interval(self):
        np.testing.assert_array_equal(wavelet_basis(np.array([-1.0])), wavelet_basis(np.array([0.0])))
        np.testing.assert_array_equal(wavelet_basis(np.array([7.0])), wavelet_basis(np.array([1.0])))

    def test_more_levels_more_columns(self):
        u = np.linspace(0, 1, 11)
        assert wavelet_basis(u, levels=2).shape[1] < wavelet_basis(u, levels=5).shape[1]

    def test_feature_dim_matches(self):
        rng = np.random.default_rng(1)
        H = np.column_stack([rng.standard_normal(40), rng.uniform(size=40), rng.choice([0.0, 1.0], 40)])
        meta = fit_meta(PolicyClass.WAVELET, 1, H, p1=3, p2=1)
        X = featurize_matrix(H, meta)
        assert X.shape == (40, feature_dim(meta))
        assert np.all(np.isfinite(X))
        np.testing.assert_array_equal(X[:, 0], 1.0)
        np.testing.assert_array_equal(X[:, -1], H[:, 2])


class TestMlpInput:
    def test_identity(self):
        meta = fit_meta(PolicyClass.MLP, 1, np.zeros((2, 3)), p1=3, p2=1)
        H = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(featurize_matrix(H, meta), H)
