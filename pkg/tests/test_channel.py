import math

import numpy as np
import pytest
from scipy.integrate import quad

from iaq.channel import ChannelSpec, ber_from_snr, transmit


class TestChannelSpec:
    def test_rejects_bad_mu(self):
        for mu in (-0.1, 1.1):
            with pytest.raises(ValueError):
                ChannelSpec(mu)

    def test_derive_is_deterministic_and_distinct(self):
        spec = ChannelSpec(0.1, seed=99)
        children = [spec.derive(i) for i in range(8)]
        again = [spec.derive(i) for i in range(8)]
        assert children == again
        assert len({c.seed for c in children}) == 8


class TestTransmit:
    def test_mu_zero_identity(self, rng):
        bits = rng.integers(0, 2, 10_000).astype(np.uint8)
        out = transmit(bits, ChannelSpec(0.0, seed=1))
        assert np.array_equal(out, bits)

    def test_mu_one_complement(self, rng):
        bits = rng.integers(0, 2, 10_000).astype(np.uint8)
        out = transmit(bits, ChannelSpec(1.0, seed=1))
        assert np.array_equal(out, 1 - bits)

    def test_deterministic(self, rng):
        bits = rng.integers(0, 2, 5_000).astype(np.uint8)
        spec = ChannelSpec(0.3, seed=42)
        assert np.array_equal(transmit(bits, spec), transmit(bits, spec))

    def test_length_preserved(self, rng):
        for n in (0, 1, 17, 1024):
            bits = rng.integers(0, 2, n).astype(np.uint8)
            assert transmit(bits, ChannelSpec(0.5, seed=3)).size == n

    def test_flip_fraction_within_binomial_band(self, rng):
        mu, n = 0.05, 1_000_000
        bits = rng.integers(0, 2, n).astype(np.uint8)
        out = transmit(bits, ChannelSpec(mu, seed=5))
        frac = np.mean(out != bits)
        band = 4 * math.sqrt(mu * (1 - mu) / n)
        assert abs(frac - mu) <= band

    def test_flips_uncorrelated_between_adjacent_positions(self, rng):
        # 2x2 contingency of (flip_i, flip_{i+1}): chi-squared statistic should
        # stay within 4 sigma of its 1-dof expectation under independence
        mu, n = 0.2, 1_000_000
        bits = np.zeros(n, dtype=np.uint8)
        flips = transmit(bits, ChannelSpec(mu, seed=8)).astype(bool)
        a, b = flips[:-1], flips[1:]
        table = np.array(
            [
                [np.sum(~a & ~b), np.sum(~a & b)],
                [np.sum(a & ~b), np.sum(a & b)],
            ],
            dtype=np.float64,
        )
        total = table.sum()
        expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / total
        chi2 = float(((table - expected) ** 2 / expected).sum())
        # chi-squared with 1 dof: mean 1, std sqrt(2)
        assert chi2 <= 1 + 4 * math.sqrt(2)

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            transmit(np.array([0, 1, 2], dtype=np.uint8), ChannelSpec(0.1))

    def test_two_hops_compose_like_a_single_bsc(self, rng):
        # two independent channels flip a bit with net probability 2 mu (1 - mu)
        mu, n = 0.1, 1_000_000
        bits = rng.integers(0, 2, n).astype(np.uint8)
        spec = ChannelSpec(mu, seed=21)
        twice = transmit(transmit(bits, spec.derive(0)), spec.derive(1))
        net = 2 * mu * (1 - mu)
        frac = np.mean(twice != bits)
        band = 4 * math.sqrt(net * (1 - net) / n)
        assert abs(frac - net) <= band


class TestBerFromSnr:
    def test_high_snr_limits(self):
        assert ber_from_snr(60.0, "bpsk-awgn") < 1e-9
        assert ber_from_snr(60.0, "bpsk-rayleigh") < 1e-3

    def test_low_snr_limits(self):
        assert ber_from_snr(-80.0, "bpsk-awgn") == pytest.approx(0.5, abs=1e-4)
        assert ber_from_snr(-80.0, "bpsk-rayleigh") == pytest.approx(0.5, abs=1e-4)

    def test_awgn_matches_gaussian_tail_integral(self):
        # BER at 0 dB equals the upper tail of the standard normal at sqrt(2)
        tail, _ = quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), math.sqrt(2.0), 40.0)
        assert ber_from_snr(0.0, "bpsk-awgn") == pytest.approx(tail, abs=1e-9)

    def test_unsupported_scheme(self):
        with pytest.raises(ValueError):
            ber_from_snr(0.0, "qam-64")
