"""Bit-allocation solvers: greedy incremental, water filling, and baselines.

The discrete problem minimizes sum_i w_i D(2**M_i; mu) subject to the total
payload plus side info staying within the budget and 0 <= M_i <= m_max. Since
the objective is separable, convex, and decreasing in each M_i (for
mu <= 3/13), a greedy one-bit-at-a-time assignment by largest weighted
marginal gain is exactly optimal.

The water-filling path relaxes levels to continuous Q_i in [1, q_max],
equalizes the marginal value across interior patches at a multiplier nu found
by bisection (with an inner Newton solve when mu > 0), then discretizes:
either by flooring the levels and greedily filling the leftover budget
(default; recovers the discrete optimum in practice) or by half-even rounding
plus the score-ordered single-bit adjustment.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .distortion import (
    MU_CONVEX_LIMIT,
    DistortionParams,
    RegimeError,
    distortion_closed_form,
    marginal_value,
    marginal_value_slope,
)
from .model import BitAllocation, Budget, GeometryError

SOLVER_NAMES = ("ia", "wf", "ia-mod", "wf-mod", "fixed-q", "top-k", "at", "ast")


@dataclass(frozen=True)
class SolverConfig:
    """Iteration caps and tolerances for the water-filling solvers.

    tau_b of None means one patch-bit (pixels_per_patch), the natural budget
    granularity; nu bounds of None trigger the automatic bracket
    [0.5 * min_i marginal(q_max; w_i), max_i marginal(1; w_i)] which encloses
    every interior multiplier.
    """

    s_max: int = 10
    t_max: int = 5
    tau_q: float = 1e-4
    tau_b: float | None = None
    nu_min: float | None = None
    nu_max: float | None = None

    def __post_init__(self) -> None:
        if self.s_max < 1 or self.t_max < 1:
            raise ValueError("iteration caps must be >= 1")
        if not self.tau_q > 0:
            raise ValueError("tau_q must be > 0")
        if self.tau_b is not None and self.tau_b < 0:
            raise ValueError("tau_b must be >= 0")
        if self.nu_min is not None and self.nu_max is not None and not self.nu_min < self.nu_max:
            raise ValueError("nu_min must be < nu_max")


@dataclass(frozen=True)
class WaterFillingResult:
    """Discrete allocation plus the continuous solution it was rounded from."""

    allocation: BitAllocation
    levels: np.ndarray
    multiplier: float
    converged: bool
    bisection_steps: int
    budget_gap: float


def _check_instance(weights: np.ndarray, budget: Budget, params: DistortionParams) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 1 or weights.size != budget.n_patches:
        raise GeometryError(
            f"{weights.size} weights for budget over {budget.n_patches} patches"
        )
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise ValueError("weights must be finite and nonnegative")
    if params.pixels_per_patch != budget.pixels_per_patch:
        raise GeometryError("distortion params and budget disagree on patch size")
    return weights


def objective(bits_per_patch, weights, params: DistortionParams) -> float:
    """Weighted distortion sum_i w_i D(2**M_i; mu) of a discrete allocation."""
    m = np.asarray(bits_per_patch, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if m.shape != w.shape:
        raise GeometryError("allocation and weights must have the same length")
    return float(np.sum(w * distortion_closed_form(np.power(2.0, m), params)))


def _greedy_fill(
    start_bits: np.ndarray, weights: np.ndarray, budget: Budget, params: DistortionParams
) -> np.ndarray:
    """Spend the budget left above start_bits one bit at a time, best gain first.

    Ties break toward the lower patch index. For a separable convex decreasing
    objective this reaches a global optimum whenever start_bits is dominated by
    one.
    """
    d_table = distortion_closed_form(
        np.power(2.0, np.arange(budget.m_max + 1, dtype=np.float64)), params
    )
    gains = d_table[:-1] - d_table[1:]  # gain of going from m to m+1 bits
    bits = start_bits.copy()
    remaining = budget.b_bar // budget.pixels_per_patch - int(bits.sum())
    heap = [
        (-weights[i] * gains[bits[i]], i)
        for i in range(bits.size)
        if bits[i] < budget.m_max
    ]
    heapq.heapify(heap)
    while remaining > 0 and heap:
        _, i = heapq.heappop(heap)
        bits[i] += 1
        remaining -= 1
        if bits[i] < budget.m_max:
            heapq.heappush(heap, (-weights[i] * gains[bits[i]], i))
    return bits


def allocate_incremental(
    weights, budget: Budget, params: DistortionParams
) -> BitAllocation:
    """Optimal greedy allocation: repeatedly give one bit where it helps most.

    Each step adds one bit (pixels_per_patch payload bits) to the patch with
    the largest weighted distortion decrease; convexity makes the greedy
    sequence globally optimal. Ties break toward the lower patch index.
    """
    weights = _check_instance(weights, budget, params)
    if params.mu > MU_CONVEX_LIMIT:
        raise RegimeError(
            f"objective not convex for mu > 3/13 (got {params.mu}); greedy invalid"
        )
    bits = _greedy_fill(
        np.zeros(budget.n_patches, dtype=np.int64), weights, budget, params
    )
    return BitAllocation(bits, budget.pixels_per_patch)


def adjust_to_budget(rounded_bits, scores, budget: Budget) -> BitAllocation:
    """Repair a rounded allocation to use the available budget exactly.

    While the allocation overshoots, one bit is removed per pass in ascending
    score order from patches above zero; while at least one full patch-bit of
    budget remains, one bit is added per pass in descending score order to
    patches below m_max. Passes repeat until no eligible patch remains, so the
    terminal state leaves less than one patch-bit unused unless saturated.
    Score ties break toward the lower patch index.
    """
    bits = np.array(rounded_bits, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    if bits.shape != scores.shape:
        raise GeometryError("rounded bits and scores must have the same length")
    if bits.size != budget.n_patches:
        raise GeometryError(
            f"{bits.size} patches for budget over {budget.n_patches}"
        )
    if np.any(bits < 0) or np.any(bits > budget.m_max):
        raise ValueError(f"rounded bits must lie in [0, {budget.m_max}]")
    ppp = budget.pixels_per_patch
    gap = budget.b_bar - ppp * int(bits.sum())
    descending = sorted(range(bits.size), key=lambda i: (-scores[i], i))
    ascending = sorted(range(bits.size), key=lambda i: (scores[i], i))
    while gap < 0:
        removed = False
        for i in ascending:
            if gap >= 0:
                break
            if bits[i] > 0:
                bits[i] -= 1
                gap += ppp
                removed = True
        if not removed:  # all zero; cannot happen with a valid budget
            break
    while gap >= ppp and np.any(bits < budget.m_max):
        for i in descending:
            if gap < ppp:
                break
            if bits[i] < budget.m_max:
                bits[i] += 1
                gap -= ppp
    return BitAllocation(bits, ppp)


def _auto_bracket(
    weights: np.ndarray, q_max: int, params: DistortionParams, config: SolverConfig
) -> tuple[float, float]:
    positive = weights[weights > 0]
    if positive.size == 0:
        raise ValueError("at least one weight must be positive")
    nu_min = config.nu_min
    nu_max = config.nu_max
    if nu_min is None:
        nu_min = 0.5 * float(marginal_value(float(q_max), positive.min(), params))
    if nu_max is None:
        nu_max = float(marginal_value(1.0, positive.max(), params))
    if not nu_min < nu_max:
        raise ValueError(f"degenerate multiplier bracket [{nu_min}, {nu_max}]")
    return nu_min, nu_max


def _closed_form_levels(nu: float, weights: np.ndarray, q_max: int, params: DistortionParams) -> np.ndarray:
    # mu = 0 inverse of the marginal value: Q = sqrt(w ln2 range^2 / (2 nu))
    raw = np.sqrt(weights * math.log(2) * params.u_range_sq / (2.0 * nu))
    return np.clip(raw, 1.0, float(q_max))


def _newton_levels(
    nu: float,
    weights: np.ndarray,
    q_max: int,
    params: DistortionParams,
    config: SolverConfig,
) -> np.ndarray:
    # Solve marginal_value(Q; w_i) = nu per patch, starting from Q = 1. The
    # marginal value is convex and strictly decreasing on [1, q_max], so the
    # iterates increase monotonically toward the root; clamping handles the
    # boundary cases where the root falls outside the box.
    q = np.ones_like(weights)
    for _ in range(config.t_max):
        resid = marginal_value(q, weights, params) - nu
        slope = marginal_value_slope(q, weights, params)
        q_next = np.clip(q - resid / slope, 1.0, float(q_max))
        delta = np.max(np.abs(q_next - q))
        q = q_next
        if delta < config.tau_q:
            break
    return q


REPAIR_MODES = ("greedy-fill", "score-order")


def _discretize(
    levels: np.ndarray,
    weights: np.ndarray,
    budget: Budget,
    params: DistortionParams,
    scores,
    repair: str,
) -> BitAllocation:
    """Turn continuous levels into a budget-feasible integer allocation.

    greedy-fill (default) floors log2 of the levels and spends the remaining
    budget by largest weighted marginal gain, which empirically recovers the
    discrete optimum; score-order rounds half-to-even and repairs with the
    score-ordered single-bit adjustment instead.
    """
    if repair == "greedy-fill":
        floored = np.clip(np.floor(np.log2(levels)), 0, budget.m_max).astype(np.int64)
        return BitAllocation(
            _greedy_fill(floored, weights, budget, params), budget.pixels_per_patch
        )
    if repair == "score-order":
        rounded = np.clip(np.round(np.log2(levels)), 0, budget.m_max).astype(np.int64)
        ordering = weights if scores is None else np.asarray(scores, dtype=np.float64)
        return adjust_to_budget(rounded, ordering, budget)
    raise ValueError(f"unknown repair mode {repair!r}; expected one of {REPAIR_MODES}")


def _waterfill(
    weights: np.ndarray,
    budget: Budget,
    params: DistortionParams,
    config: SolverConfig,
    scores,
    inner,
    max_steps: int,
    repair: str,
) -> WaterFillingResult:
    ppp = budget.pixels_per_patch
    tau_b = config.tau_b if config.tau_b is not None else float(ppp)
    nu_min, nu_max = _auto_bracket(weights, budget.q_max, params, config)
    best_levels = np.ones_like(weights)
    best_nu = nu_max
    best_gap = float(budget.b_bar)  # gap of the all-ones starting point
    converged = False
    steps = 0
    for steps in range(1, max_steps + 1):
        nu = 0.5 * (nu_min + nu_max)
        levels = inner(nu, weights, budget.q_max, params, config)
        payload = ppp * float(np.sum(np.log2(levels)))
        gap = payload - budget.b_bar
        if abs(gap) < best_gap:
            best_levels, best_nu, best_gap = levels, nu, abs(gap)
        if payload < budget.b_bar:
            nu_max = nu
        else:
            nu_min = nu
        if abs(gap) < tau_b:
            converged = True
            break
    allocation = _discretize(best_levels, weights, budget, params, scores, repair)
    return WaterFillingResult(
        allocation=allocation,
        levels=best_levels,
        multiplier=best_nu,
        converged=converged,
        bisection_steps=steps,
        budget_gap=best_gap,
    )


def allocate_waterfilling(
    weights,
    budget: Budget,
    params: DistortionParams,
    scores=None,
    config: SolverConfig | None = None,
    repair: str = "greedy-fill",
) -> WaterFillingResult:
    """Error-free water filling: closed-form levels, tight bisection, discretize.

    The continuous optimum is Q_i = clip(sqrt(w_i ln2 (u_max-u_min)**2 /
    (2 nu)), 1, q_max) with nu chosen so the log2 levels sum to the budget.
    Because each evaluation is closed form, the bisection runs to near machine
    precision regardless of config.s_max; config still controls tau_b and the
    optional multiplier bracket. See _discretize for the repair modes.
    """
    weights = _check_instance(weights, budget, params)
    if np.any(weights <= 0):
        raise ValueError("water filling requires strictly positive weights")
    if params.mu != 0.0:
        raise RegimeError(
            "allocate_waterfilling solves the error-free problem; "
            "use allocate_waterfilling_modified for mu > 0"
        )
    config = config or SolverConfig(tau_b=1e-9)

    def inner(nu, w, q_max, p, _cfg):
        return _closed_form_levels(nu, w, q_max, p)

    return _waterfill(
        weights, budget, params, config, scores, inner, max_steps=200, repair=repair
    )


def allocate_waterfilling_modified(
    weights,
    budget: Budget,
    params: DistortionParams,
    scores=None,
    config: SolverConfig | None = None,
    repair: str = "greedy-fill",
) -> WaterFillingResult:
    """Channel-aware water filling: bisection on nu with an inner Newton solve.

    Each bisection step solves marginal_value(Q_i; w_i) = nu per patch by
    Newton iteration from Q = 1 (clamped to [1, q_max]), then narrows the nu
    bracket on the sign of the budget gap. Stops at |gap| < tau_b or after
    s_max steps, reporting the best iterate rather than raising on
    non-convergence. mu = 0 short-circuits to the closed form.
    """
    weights = _check_instance(weights, budget, params)
    if np.any(weights <= 0):
        raise ValueError("water filling requires strictly positive weights")
    if params.mu >= MU_CONVEX_LIMIT:
        raise RegimeError(
            f"modified water filling requires mu < 3/13, got {params.mu}"
        )
    if params.mu == 0.0:
        return allocate_waterfilling(weights, budget, params, scores, config, repair)
    config = config or SolverConfig()
    return _waterfill(
        weights,
        budget,
        params,
        config,
        scores,
        _newton_levels,
        max_steps=config.s_max,
        repair=repair,
    )


def brute_force_optimal(
    weights, budget: Budget, params: DistortionParams
) -> BitAllocation:
    """Exhaustive minimizer over all feasible depth vectors; test oracle.

    Enumerates (m_max + 1)**N combinations, so instances are capped at N <= 8
    and m_max <= 3. Ties resolve to the lexicographically first combination.
    """
    weights = _check_instance(weights, budget, params)
    n = budget.n_patches
    if n > 8 or budget.m_max > 3:
        raise ValueError(
            f"instance too large for enumeration (N={n}, m_max={budget.m_max})"
        )
    d_table = distortion_closed_form(
        np.power(2.0, np.arange(budget.m_max + 1, dtype=np.float64)), params
    )
    combos = np.array(
        list(itertools.product(range(budget.m_max + 1), repeat=n)), dtype=np.int64
    )
    payload = budget.pixels_per_patch * combos.sum(axis=1)
    feasible = payload <= budget.b_bar
    objectives = d_table[combos] @ weights
    objectives[~feasible] = np.inf
    best = int(np.argmin(objectives))
    if not feasible[best]:
        raise ValueError("no feasible allocation under the budget")
    return BitAllocation(combos[best], budget.pixels_per_patch)


def allocate_fixed_q(m_bits: int, n_patches: int, pixels_per_patch: int) -> BitAllocation:
    """Uniform depth baseline: every patch gets m_bits."""
    if m_bits < 0:
        raise ValueError("m_bits must be >= 0")
    return BitAllocation(np.full(n_patches, m_bits, dtype=np.int64), pixels_per_patch)


def _select_to_allocation(
    selected: np.ndarray, m_max: int, pixels_per_patch: int
) -> BitAllocation:
    bits = np.where(selected, m_max, 0).astype(np.int64)
    return BitAllocation(bits, pixels_per_patch)


def allocate_top_k(
    scores, k_percent: float, m_max: int, pixels_per_patch: int
) -> BitAllocation:
    """Give m_max to the top k% of patches by score, nothing to the rest."""
    if not 0 < k_percent <= 100:
        raise ValueError("k_percent must lie in (0, 100]")
    scores = np.asarray(scores, dtype=np.float64)
    count = int(scores.size * k_percent / 100.0)
    order = sorted(range(scores.size), key=lambda i: (-scores[i], i))
    selected = np.zeros(scores.size, dtype=bool)
    selected[order[:count]] = True
    return _select_to_allocation(selected, m_max, pixels_per_patch)


def allocate_threshold(
    scores, delta: float, m_max: int, pixels_per_patch: int
) -> BitAllocation:
    """Give m_max to patches whose score exceeds delta, nothing to the rest."""
    if not delta > 0:
        raise ValueError("delta must be > 0")
    scores = np.asarray(scores, dtype=np.float64)
    return _select_to_allocation(scores > delta, m_max, pixels_per_patch)


def allocate_sum_threshold(
    scores, delta_sum: float, m_max: int, pixels_per_patch: int
) -> BitAllocation:
    """Select patches in descending score order until their scores sum past delta_sum."""
    if not delta_sum > 0:
        raise ValueError("delta_sum must be > 0")
    scores = np.asarray(scores, dtype=np.float64)
    order = sorted(range(scores.size), key=lambda i: (-scores[i], i))
    selected = np.zeros(scores.size, dtype=bool)
    total = 0.0
    for i in order:
        selected[i] = True
        total += scores[i]
        if total > delta_sum:
            break
    return _select_to_allocation(selected, m_max, pixels_per_patch)


def max_uniform_bits(budget: Budget) -> int:
    """Largest uniform depth (fixed-q) that fits the budget."""
    return min(budget.m_max, budget.b_bar // (budget.pixels_per_patch * budget.n_patches))
