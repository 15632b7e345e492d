"""Closed-form distortion model under bit flips, its derivatives, and oracles.

For a patch quantized at Q = 2**M levels and sent through a binary symmetric
channel with flip probability mu, the per-patch expected squared error is
bounded by the closed form

    D(Q; mu) = d0 / (1 - mu) * Q**x * ((4/3) mu Q**2 + 4 mu Q + (1 - (16/3) mu))

with x = log2((1 - mu) / 4) and d0 the zero-bit worst case
pixels_per_patch * (u_max - u_min)**2 / 4. At mu = 0 this collapses to
d0 * Q**-2, the pure quantization bound. The model is convex and decreasing in
M for mu <= 3/13, which is what makes greedy and water-filling allocation
exact; the marginal-value function used by the KKT solvers and its derivative
live here too.

Two independent oracles cross-check the closed form: an exhaustive enumeration
over codeword pairs (exact for uniform input) and a seeded Monte Carlo run of
the real quantize -> flip -> dequantize path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import IaqError

MU_CONVEX_LIMIT = 3.0 / 13.0


class RegimeError(IaqError, ValueError):
    """Flip probability outside the regime where the operation is defined."""


@dataclass(frozen=True)
class DistortionParams:
    """Zero-bit distortion scale, flip probability, and patch size."""

    d0: float
    mu: float
    pixels_per_patch: int = 1

    def __post_init__(self) -> None:
        if not 0.0 <= self.mu < 1.0:
            raise RegimeError(f"mu must lie in [0, 1), got {self.mu}")
        if self.d0 < 0 or not math.isfinite(self.d0):
            raise ValueError("d0 must be finite and nonnegative")
        if self.pixels_per_patch < 1:
            raise ValueError("pixels_per_patch must be >= 1")

    @property
    def x(self) -> float:
        """Exponent log2((1 - mu) / 4); always <= -2."""
        return math.log2((1.0 - self.mu) / 4.0)

    @property
    def u_range_sq(self) -> float:
        """(u_max - u_min)**2 implied by d0 and the patch size."""
        return 4.0 * self.d0 / self.pixels_per_patch

    @classmethod
    def from_range(
        cls, u_min: float, u_max: float, pixels_per_patch: int, mu: float
    ) -> "DistortionParams":
        d0 = pixels_per_patch * (u_max - u_min) ** 2 / 4.0
        return cls(d0=d0, mu=mu, pixels_per_patch=pixels_per_patch)

    def with_mu(self, mu: float) -> "DistortionParams":
        return DistortionParams(self.d0, mu, self.pixels_per_patch)


def quant_bound(m_bits, params: DistortionParams):
    """Worst-case per-patch squared quantization error d0 * 4**-M (no channel)."""
    m = np.asarray(m_bits, dtype=np.float64)
    out = params.d0 * np.power(4.0, -m)
    return float(out) if np.isscalar(m_bits) else out


def _pow_q_x(q, x: float):
    # log-domain Q**x; q >= 1 and x <= -2 keep the exponent nonpositive
    return np.exp(x * np.log(q))


def distortion_closed_form(q, params: DistortionParams):
    """Expected-distortion bound D(Q; mu) for level count Q >= 1."""
    qa = np.asarray(q, dtype=np.float64)
    if np.any(qa < 1):
        raise ValueError("Q must be >= 1")
    mu = params.mu
    braces = (4.0 / 3.0) * mu * qa**2 + 4.0 * mu * qa + (1.0 - (16.0 / 3.0) * mu)
    out = params.d0 / (1.0 - mu) * _pow_q_x(qa, params.x) * braces
    return float(out) if np.isscalar(q) else out


def flip_error_terms(m_bits: int, params: DistortionParams) -> tuple[float, float]:
    """Per-pixel no-flip and single-flip error terms (E0, E1) at depth M.

    E0 = (1-mu)**M (delta/2)**2 covers the error-free outcome at its worst-case
    in-cell error; E1 sums the worst case over which single bit flips, each
    pattern weighted mu (1-mu)**(M-1). M = 0 transmits nothing, so E1 = 0 and
    E0 is the bare half-step bound.
    """
    if m_bits < 0:
        raise ValueError("m_bits must be >= 0")
    mu = params.mu
    half_step_sq = (params.u_range_sq / 4.0) * 4.0 ** (-m_bits)
    if m_bits == 0:
        return half_step_sq, 0.0
    e0 = (1.0 - mu) ** m_bits * half_step_sq
    t = np.arange(1, m_bits + 1)
    flip_sq = (2.0 ** (m_bits + 1) * 0.5**t + 1.0) ** 2
    e1 = (1.0 - mu) ** (m_bits - 1) * mu * half_step_sq * float(flip_sq.sum())
    return float(e0), float(e1)


def marginal_value(q, weight, params: DistortionParams):
    """Marginal distortion decrease per allocated bit per pixel, at level Q.

    This is -weight / pixels_per_patch times the derivative of D(Q; mu) with
    respect to log2 Q. The KKT stationarity condition of the continuous
    allocation problem equates it to the multiplier nu across all interior
    patches. Strictly decreasing in Q only while mu < 3/13, so larger flip
    probabilities are rejected.
    """
    if params.mu >= MU_CONVEX_LIMIT:
        raise RegimeError(
            f"marginal value is monotone only for mu < 3/13, got {params.mu}"
        )
    qa = np.asarray(q, dtype=np.float64)
    if np.any(qa < 1):
        raise ValueError("Q must be >= 1")
    mu, x = params.mu, params.x
    braces = (
        -(4.0 / 3.0) * mu * qa**2 * math.log2(1.0 - mu)
        - 4.0 * mu * qa * math.log2((1.0 - mu) / 2.0)
        - (1.0 - (16.0 / 3.0) * mu) * math.log2((1.0 - mu) / 4.0)
    )
    scale = np.asarray(weight, dtype=np.float64) * params.d0 * math.log(2) / (
        params.pixels_per_patch * (1.0 - mu)
    )
    out = scale * _pow_q_x(qa, x) * braces
    return float(out) if np.isscalar(q) and np.isscalar(weight) else out


def marginal_value_slope(q, weight, params: DistortionParams):
    """Derivative of marginal_value with respect to Q; negative on the regime."""
    if params.mu >= MU_CONVEX_LIMIT:
        raise RegimeError(
            f"marginal value is monotone only for mu < 3/13, got {params.mu}"
        )
    qa = np.asarray(q, dtype=np.float64)
    if np.any(qa < 1):
        raise ValueError("Q must be >= 1")
    mu, x = params.mu, params.x
    g = (
        -(4.0 / 3.0) * mu * (x + 2.0) ** 2 * qa**2
        - 4.0 * mu * (x + 1.0) ** 2 * qa
        - x**2 * (1.0 - (16.0 / 3.0) * mu)
    )
    scale = np.asarray(weight, dtype=np.float64) * params.d0 * math.log(2) / (
        params.pixels_per_patch * (1.0 - mu)
    )
    out = scale * _pow_q_x(qa, x - 1.0) * g
    return float(out) if np.isscalar(q) and np.isscalar(weight) else out


def distortion_bit_slope(m_bits, params: DistortionParams):
    """First derivative of D(2**M; mu) with respect to M; <= 0 for mu <= 0.3."""
    m = np.asarray(m_bits, dtype=np.float64)
    mu, x = params.mu, params.x
    q = np.power(2.0, m)
    inner = (
        (4.0 / 3.0) * mu * (x + 2.0) * q**2
        + 4.0 * mu * (x + 1.0) * q
        + x * (1.0 - (16.0 / 3.0) * mu)
    )
    out = params.d0 * math.log(2) / (1.0 - mu) * np.power(2.0, x * m) * inner
    return float(out) if np.isscalar(m_bits) else out


def distortion_bit_curvature(m_bits, params: DistortionParams):
    """Second derivative of D(2**M; mu) with respect to M; >= 0 for mu <= 3/13."""
    m = np.asarray(m_bits, dtype=np.float64)
    mu, x = params.mu, params.x
    q = np.power(2.0, m)
    inner = (
        (4.0 / 3.0) * mu * (x + 2.0) ** 2 * q**2
        + 4.0 * mu * (x + 1.0) ** 2 * q
        + x**2 * (1.0 - (16.0 / 3.0) * mu)
    )
    out = params.d0 * math.log(2) ** 2 / (1.0 - mu) * np.power(2.0, x * m) * inner
    return float(out) if np.isscalar(m_bits) else out


def exact_expected_distortion(
    m_bits: int, params: DistortionParams, conditioning: str = "full-bsc"
) -> float:
    """Exact per-patch expected squared error for uniform input, by enumeration.

    Enumerates every (sent, received) codeword pair. Conditional on landing in
    cell s and decoding cell r, the error expectation for uniform in-cell input
    is delta**2 / 12 plus the squared level offset (s - r)**2 delta**2.

    conditioning "full-bsc" weighs patterns by the full product channel law;
    "at-most-one-flip" keeps only the zero- and one-flip patterns at their
    unnormalized probabilities (1-mu)**M and mu (1-mu)**(M-1), mirroring the
    single-flip accounting of the analytical bound.
    """
    if not 1 <= m_bits <= 8:
        raise ValueError(f"enumeration supports 1 <= m_bits <= 8, got {m_bits}")
    if conditioning not in ("full-bsc", "at-most-one-flip"):
        raise ValueError(f"unknown conditioning {conditioning!r}")
    mu = params.mu
    n = 2 ** m_bits
    step_sq = params.u_range_sq / n**2
    sent = np.arange(n)
    xor = sent[:, None] ^ sent[None, :]
    flips = np.zeros((n, n), dtype=np.int64)
    for b in range(m_bits):
        flips += (xor >> b) & 1
    if conditioning == "full-bsc":
        pattern_prob = mu**flips * (1.0 - mu) ** (m_bits - flips)
    else:
        pattern_prob = np.zeros((n, n))
        pattern_prob[flips == 0] = (1.0 - mu) ** m_bits
        pattern_prob[flips == 1] = mu * (1.0 - mu) ** (m_bits - 1)
    offset_sq = (sent[:, None] - sent[None, :]).astype(np.float64) ** 2 * step_sq
    per_cell = pattern_prob * (step_sq / 12.0 + offset_sq)
    per_pixel = float(per_cell.sum()) / n
    return params.pixels_per_patch * per_pixel


def monte_carlo_distortion(
    m_bits: int,
    params: DistortionParams,
    seed: int,
    trials: int,
) -> tuple[float, float]:
    """Empirical per-patch distortion of quantize -> flip -> dequantize.

    Each trial draws one uniform pixel, transmits its code through the channel,
    and measures the squared reconstruction error; the per-pixel mean and its
    standard error are scaled to per-patch units. Deterministic for a fixed
    seed (PCG64 generator).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if m_bits < 1:
        raise ValueError("m_bits must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    u_range = math.sqrt(params.u_range_sq)
    n = 2 ** m_bits
    step = u_range / n
    u = rng.uniform(0.0, u_range, trials)
    if step == 0.0:
        idx = np.zeros(trials, dtype=np.int64)
    else:
        idx = np.clip(np.ceil(u / step).astype(np.int64) - 1, 0, n - 1)
    flip_mask = rng.random((trials, m_bits)) < params.mu
    shifts = np.arange(m_bits - 1, -1, -1)
    bits = (idx[:, None] >> shifts) & 1
    received = (bits ^ flip_mask) @ (1 << shifts).astype(np.int64)
    recon = (received + 0.5) * step
    err_sq = (u - recon) ** 2
    mean = float(err_sq.mean())
    stderr = float(err_sq.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    ppp = params.pixels_per_patch
    return ppp * mean, ppp * stderr


def export_distortion_grid(
    path: str | Path,
    params: DistortionParams,
    q_values,
    mu_values,
) -> None:
    """Write a (mu, Q, distortion) CSV grid for plotting."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mu", "q", "distortion"])
        for mu in mu_values:
            p = params.with_mu(float(mu))
            for q in q_values:
                writer.writerow([repr(float(mu)), repr(float(q)), repr(distortion_closed_form(float(q), p))])
