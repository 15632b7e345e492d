"""Binary symmetric channel simulation and an SNR-to-flip-probability helper.

The channel flips each bit independently with probability mu. Randomness comes
from numpy's PCG64 generator seeded per transmission, so a given (spec, input)
pair always produces the same output; parallel transmissions should derive
distinct child specs with ChannelSpec.derive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RNG_ALGORITHM = "pcg64"

BER_SCHEMES = ("bpsk-awgn", "bpsk-rayleigh")


@dataclass(frozen=True)
class ChannelSpec:
    """Bit-flip probability and RNG seed of one channel use."""

    mu: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")

    def derive(self, index: int) -> "ChannelSpec":
        """Deterministic child spec for the index-th parallel transmission.

        Child seeds come from numpy's SeedSequence with spawn_key (index,), so
        the split is reproducible across runs and machines.
        """
        child = np.random.SeedSequence(entropy=self.seed, spawn_key=(index,))
        return ChannelSpec(self.mu, int(child.generate_state(1, np.uint64)[0]))


def transmit(bits: np.ndarray, spec: ChannelSpec) -> np.ndarray:
    """Flip each bit independently with probability spec.mu."""
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size and arr.max() > 1:
        raise ValueError("input must contain only 0/1 values")
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    flip = rng.random(arr.size) < spec.mu
    return arr ^ flip.astype(np.uint8)


def ber_from_snr(snr_db: float, scheme: str = "bpsk-awgn") -> float:
    """Textbook bit error rate for the given average SNR in dB.

    bpsk-awgn uses the Gaussian tail Q(sqrt(2 snr)); bpsk-rayleigh the
    average over Rayleigh fades. Advisory plumbing: solvers take mu directly.
    """
    snr = 10.0 ** (snr_db / 10.0)
    if scheme == "bpsk-awgn":
        return 0.5 * math.erfc(math.sqrt(snr))
    if scheme == "bpsk-rayleigh":
        return 0.5 * (1.0 - math.sqrt(snr / (1.0 + snr)))
    raise ValueError(f"unsupported scheme {scheme!r}; expected one of {BER_SCHEMES}")
