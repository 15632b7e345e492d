"""Parametric mapping from importance scores to optimization weights.

The weight of a patch with score a is

    w(a) = (1 - d) / (a_max - a_min)**gamma * (a - a_min)**gamma + d

which rises from d at a_min to 1 at a_max. gamma > 1 makes the map convex,
gamma < 1 concave, gamma = 1 affine. The floor d keeps weights strictly
positive so no patch is ever entirely ignored by the solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ImportanceMap


@dataclass(frozen=True)
class WeightFunctionParams:
    """Shape exponent and floor of the score-to-weight map."""

    gamma: float = 1.0
    floor: float = 1e-7

    def __post_init__(self) -> None:
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not 0 < self.floor < 1:
            raise ValueError("floor must lie in (0, 1)")


def weight(
    a: float, a_min: float, a_max: float, params: WeightFunctionParams | None = None
) -> float:
    """Weight of a single score relative to the observed score range.

    A degenerate range (a_max == a_min) maps every score to 1: all patches are
    equally important and downstream allocation reduces to the uniform case.
    """
    params = params or WeightFunctionParams()
    if not a_min <= a <= a_max:
        raise ValueError(f"score {a} outside [{a_min}, {a_max}]")
    if a_max == a_min:
        return 1.0
    d = params.floor
    scaled = (a - a_min) / (a_max - a_min)
    return (1.0 - d) * scaled ** params.gamma + d


def weight_vector(
    scores: ImportanceMap | np.ndarray, params: WeightFunctionParams | None = None
) -> np.ndarray:
    """Element-wise weights with a_min/a_max taken over the whole map."""
    params = params or WeightFunctionParams()
    arr = scores.scores if isinstance(scores, ImportanceMap) else np.asarray(scores, dtype=np.float64)
    a_min, a_max = float(arr.min()), float(arr.max())
    if a_max == a_min:
        return np.ones_like(arr)
    d = params.floor
    scaled = (arr - a_min) / (a_max - a_min)
    return (1.0 - d) * scaled ** params.gamma + d
