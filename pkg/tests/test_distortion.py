import math

import numpy as np
import pytest

from iaq.distortion import (
    MU_CONVEX_LIMIT,
    DistortionParams,
    RegimeError,
    distortion_bit_curvature,
    distortion_bit_slope,
    distortion_closed_form,
    exact_expected_distortion,
    export_distortion_grid,
    flip_error_terms,
    marginal_value,
    marginal_value_slope,
    monte_carlo_distortion,
    quant_bound,
)

PPP = 256
RANGE = 255.0


def params(mu, ppp=PPP, u_range=RANGE):
    return DistortionParams.from_range(0.0, u_range, ppp, mu)


MU_GRID = np.linspace(0.0, MU_CONVEX_LIMIT, 20, endpoint=False)


class TestParams:
    def test_d0(self):
        p = params(0.0)
        assert p.d0 == PPP * RANGE**2 / 4

    def test_exponent_cap(self):
        for mu in (0.0, 0.1, 0.9):
            assert DistortionParams(1.0, mu).x <= -2.0

    def test_rejects_mu_one(self):
        with pytest.raises(RegimeError):
            DistortionParams(1.0, 1.0)

    def test_rejects_negative_mu(self):
        with pytest.raises(RegimeError):
            DistortionParams(1.0, -0.01)


class TestQuantBound:
    def test_zero_and_one_bit(self):
        p = params(0.0)
        assert quant_bound(0, p) == p.d0
        assert quant_bound(1, p) == p.d0 / 4

    def test_matches_closed_form_at_mu_zero(self):
        p = params(0.0)
        for m in range(9):
            assert distortion_closed_form(2.0**m, p) == pytest.approx(
                quant_bound(m, p), rel=1e-15
            )


class TestClosedForm:
    def test_q_one_collapses(self):
        for mu in (0.0, 0.05, 0.2, 0.5):
            p = params(mu)
            assert distortion_closed_form(1.0, p) == pytest.approx(
                p.d0 / (1 - mu), rel=1e-13
            )

    def test_mu_zero_reduction(self):
        p = params(0.0)
        assert distortion_closed_form(4.0, p) == pytest.approx(p.d0 / 16, rel=1e-15)
        for q in 2.0 ** np.arange(9):
            assert distortion_closed_form(q, p) == pytest.approx(
                p.d0 * q**-2, rel=1e-15, abs=0
            )

    def test_matches_term_sum_at_one_bit(self):
        p = params(0.05)
        e0, e1 = flip_error_terms(1, p)
        assert PPP * (e0 + e1) == pytest.approx(
            distortion_closed_form(2.0, p), rel=1e-12
        )

    def test_rejects_q_below_one(self):
        with pytest.raises(ValueError):
            distortion_closed_form(0.5, params(0.0))

    def test_monotone_and_convex_in_bits_on_regime(self):
        for mu in MU_GRID:
            p = params(mu)
            d = distortion_closed_form(2.0 ** np.arange(9, dtype=float), p)
            first = np.diff(d)
            second = np.diff(d, 2)
            assert np.all(first <= 1e-9 * p.d0)
            assert np.all(second >= -1e-9 * p.d0)


class TestFlipErrorTerms:
    def test_mu_zero(self):
        p = params(0.0)
        for m in range(1, 9):
            e0, e1 = flip_error_terms(m, p)
            assert e0 == pytest.approx((RANGE / 2**m / 2) ** 2, rel=1e-13)
            assert e1 == 0.0

    def test_zero_bits(self):
        e0, e1 = flip_error_terms(0, params(0.3))
        assert e0 == pytest.approx((RANGE / 2) ** 2, rel=1e-13)
        assert e1 == 0.0

    def test_gap_to_closed_form_has_known_residual(self):
        # the term sum exceeds the closed form by exactly
        # mu (M-1) (delta/2)^2 (1-mu)^(M-1) per pixel for M > 1
        for mu in (0.01, 0.05, 0.1):
            p = params(mu)
            for m in range(2, 9):
                e0, e1 = flip_error_terms(m, p)
                half_step_sq = (RANGE / 2**m / 2) ** 2
                predicted = mu * (m - 1) * half_step_sq * (1 - mu) ** (m - 1)
                gap = PPP * (e0 + e1) - distortion_closed_form(2.0**m, p)
                assert gap == pytest.approx(PPP * predicted, rel=1e-9)


class TestMarginalValue:
    def test_mu_zero_reduction(self):
        p = params(0.0)
        for q, w in ((1.0, 1.0), (16.0, 0.3), (256.0, 1e-7)):
            expected = w * math.log(2) * RANGE**2 / (2 * q * q)
            assert marginal_value(q, w, p) == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("mu", [0.0, 0.05, 0.1, 0.2])
    def test_strictly_decreasing(self, mu):
        q = np.linspace(1.0, 256.0, 1000)
        values = marginal_value(q, 1.0, params(mu))
        assert np.all(np.diff(values) < 0)

    def test_linear_in_weight(self):
        p = params(0.1)
        for q in (1.0, 7.3, 256.0):
            assert marginal_value(q, 2.0, p) == pytest.approx(
                2 * marginal_value(q, 1.0, p), rel=1e-14
            )

    def test_regime_rejected(self):
        with pytest.raises(RegimeError):
            marginal_value(2.0, 1.0, params(MU_CONVEX_LIMIT))
        with pytest.raises(RegimeError):
            marginal_value_slope(2.0, 1.0, params(0.25))


class TestMarginalValueSlope:
    def test_mu_zero_negative_everywhere(self):
        p = params(0.0)
        q = np.linspace(1.0, 256.0, 500)
        slope = marginal_value_slope(q, 1.0, p)
        assert np.all(slope < 0)
        # at mu = 0 the quadratic factor collapses to -x^2 = -4
        expected = p.d0 * math.log(2) / PPP * q ** (-3.0) * (-4.0)
        assert np.allclose(slope, expected, rtol=1e-12)

    @pytest.mark.parametrize("mu", [0.01, 0.05, 0.1, 0.2, 0.22])
    def test_matches_finite_differences(self, mu):
        p = params(mu)
        q = np.linspace(1.5, 255.0, 200)
        eps = 1e-5
        fd = (marginal_value(q + eps, 1.0, p) - marginal_value(q - eps, 1.0, p)) / (2 * eps)
        an = marginal_value_slope(q, 1.0, p)
        assert np.allclose(an, fd, rtol=1e-6)

    def test_negative_at_q_one_across_regime(self):
        for mu in MU_GRID:
            assert marginal_value_slope(1.0, 1.0, params(mu)) < 0


class TestBitDerivatives:
    def test_mu_zero_slope(self):
        p = params(0.0)
        for m in range(9):
            expected = -p.d0 * math.log(4) * 4.0**-m
            assert distortion_bit_slope(m, p) == pytest.approx(expected, rel=1e-13)

    def test_slope_nonpositive_up_to_three_tenths(self):
        for mu in np.linspace(0.0, 0.3, 16):
            p = params(mu)
            assert np.all(distortion_bit_slope(np.arange(9, dtype=float), p) <= 1e-12)

    def test_curvature_nonnegative_on_regime(self):
        for mu in MU_GRID:
            p = params(mu)
            assert np.all(
                distortion_bit_curvature(np.arange(9, dtype=float), p) >= -1e-12
            )

    def test_slope_matches_finite_difference_of_closed_form(self):
        p = params(0.07)
        eps = 1e-6
        for m in np.linspace(0.5, 7.5, 15):
            fd = (
                distortion_closed_form(2.0 ** (m + eps), p)
                - distortion_closed_form(2.0 ** (m - eps), p)
            ) / (2 * eps)
            assert distortion_bit_slope(m, p) == pytest.approx(fd, rel=1e-6)

    def test_curvature_matches_finite_difference_of_slope(self):
        p = params(0.15)
        eps = 1e-6
        for m in np.linspace(0.5, 7.5, 15):
            fd = (
                distortion_bit_slope(m + eps, p) - distortion_bit_slope(m - eps, p)
            ) / (2 * eps)
            assert distortion_bit_curvature(m, p) == pytest.approx(fd, rel=1e-6)


class TestExactExpectedDistortion:
    def test_mu_zero_uniform_noise(self):
        p = params(0.0)
        for m in range(1, 9):
            exact = exact_expected_distortion(m, p, "full-bsc")
            step_sq = (RANGE / 2**m) ** 2
            assert exact == pytest.approx(PPP * step_sq / 12, rel=1e-12)
            assert exact <= quant_bound(m, p)

    def test_single_flip_bound_at_one_bit(self):
        for mu in MU_GRID:
            p = params(mu)
            exact = exact_expected_distortion(1, p, "at-most-one-flip")
            assert exact <= distortion_closed_form(2.0, p) * (1 + 1e-12)

    def test_truncation_error_is_second_order(self):
        # dropping multi-flip patterns changes the value by O(mu^2)
        diffs = []
        for mu in (0.01, 0.02):
            p = params(mu)
            full = exact_expected_distortion(3, p, "full-bsc")
            trunc = exact_expected_distortion(3, p, "at-most-one-flip")
            diffs.append(abs(full - trunc) / mu**2)
        ratio = diffs[1] / diffs[0]
        assert 0.5 < ratio < 2.0  # stable when scaled by mu^2

    def test_out_of_range_bits(self):
        with pytest.raises(ValueError):
            exact_expected_distortion(0, params(0.05))
        with pytest.raises(ValueError):
            exact_expected_distortion(9, params(0.05))

    def test_unknown_conditioning(self):
        with pytest.raises(ValueError):
            exact_expected_distortion(3, params(0.05), "half-flips")


class TestMonteCarlo:
    def test_deterministic(self):
        p = params(0.05)
        a = monte_carlo_distortion(4, p, seed=7, trials=2000)
        b = monte_carlo_distortion(4, p, seed=7, trials=2000)
        assert a == b

    def test_matches_enumeration_no_channel(self):
        p = params(0.0)
        mean, se = monte_carlo_distortion(3, p, seed=11, trials=200_000)
        exact = exact_expected_distortion(3, p, "full-bsc")
        assert abs(mean - exact) <= 4 * se

    def test_matches_enumeration_with_channel(self):
        p = params(0.05)
        mean, se = monte_carlo_distortion(4, p, seed=13, trials=1_000_000)
        exact = exact_expected_distortion(4, p, "full-bsc")
        assert abs(mean - exact) <= 4 * se


def test_export_grid(tmp_path):
    path = tmp_path / "grid.csv"
    export_distortion_grid(path, params(0.0), q_values=[1, 2, 4], mu_values=[0.0, 0.05])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "mu,q,distortion"
    assert len(lines) == 7
    mu, q, d = lines[1].split(",")
    assert float(d) == pytest.approx(distortion_closed_form(float(q), params(float(mu))))
