import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from iaq.model import ImportanceMap
from iaq.weights import WeightFunctionParams, weight, weight_vector

D = 1e-7


class TestParams:
    def test_defaults(self):
        p = WeightFunctionParams()
        assert p.gamma == 1.0 and p.floor == 1e-7

    @pytest.mark.parametrize("gamma", [0.0, -1.0])
    def test_rejects_bad_gamma(self, gamma):
        with pytest.raises(ValueError):
            WeightFunctionParams(gamma=gamma)

    @pytest.mark.parametrize("floor", [0.0, 1.0, -0.5])
    def test_rejects_bad_floor(self, floor):
        with pytest.raises(ValueError):
            WeightFunctionParams(floor=floor)


class TestWeight:
    def test_upper_endpoint_is_one(self):
        assert weight(0.9, 0.1, 0.9) == pytest.approx(1.0, abs=1e-15)

    def test_lower_endpoint_is_floor(self):
        assert weight(0.1, 0.1, 0.9) == pytest.approx(D, abs=1e-20)

    def test_linear_midpoint(self):
        w = weight(0.5, 0.0, 1.0, WeightFunctionParams(gamma=1.0))
        assert w == pytest.approx((1 - D) / 2 + D, rel=1e-12)

    def test_degenerate_range_maps_to_one(self):
        assert weight(0.3, 0.3, 0.3) == 1.0

    def test_outside_range_rejected(self):
        with pytest.raises(ValueError):
            weight(1.1, 0.0, 1.0)


class TestWeightVector:
    def test_uniform_scores_all_one(self):
        imap = ImportanceMap.from_raw(np.full(8, 3.0))
        assert np.all(weight_vector(imap) == 1.0)

    def test_extremes_map_to_floor_and_one(self):
        w = weight_vector(np.array([0.2, 0.8]))
        assert w[0] == pytest.approx(D, abs=1e-20)
        assert w[1] == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("gamma", [0.5, 1.0, 1.5])
    def test_preserves_score_ordering(self, gamma, rng):
        scores = rng.uniform(0, 1, 64)
        w = weight_vector(scores, WeightFunctionParams(gamma=gamma))
        for i in range(64):
            for j in range(64):
                if scores[i] >= scores[j]:
                    assert w[i] >= w[j]

    @given(
        st.lists(st.floats(0, 1, allow_nan=False), min_size=2, max_size=30),
        st.floats(0.1, 4.0),
    )
    def test_range_bounds(self, scores, gamma):
        w = weight_vector(np.asarray(scores), WeightFunctionParams(gamma=gamma))
        assert np.all(w >= D - 1e-20)
        assert np.all(w <= 1.0 + 1e-12)

    def test_curvature_by_gamma(self):
        # discrete second differences on a uniform grid: convex for gamma > 1,
        # concave for gamma < 1, affine at gamma = 1
        grid = np.linspace(0.0, 1.0, 21)
        for gamma, sign in ((1.5, 1), (0.5, -1)):
            w = weight_vector(grid, WeightFunctionParams(gamma=gamma))
            second = np.diff(w, 2)
            assert np.all(sign * second >= -1e-12)
        w_lin = weight_vector(grid, WeightFunctionParams(gamma=1.0))
        assert np.all(np.abs(np.diff(w_lin, 2)) < 1e-12)
