"""Shared data model: images, patch geometry, importance maps, budgets, allocations.

Everything here is immutable after construction and safe to share across
concurrent workers. Pixel layout is row-major over (row, col, channel); patch
layout is row-major over the patch grid. This ordering is load-bearing: the
bitstream layout downstream depends on it being deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class IaqError(Exception):
    """Base class for all library errors."""


class GeometryError(IaqError, ValueError):
    """Image, partition, or allocation shapes are inconsistent."""


class BudgetError(IaqError, ValueError):
    """Bit budget is infeasible or not binding."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ImageTensor:
    """H x W x C grid of real pixel values.

    A 2-D array is promoted to a single-channel tensor. All values must be
    finite; empty tensors are rejected.
    """

    pixels: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImageTensor):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, np.newaxis]
        if arr.ndim != 3:
            raise GeometryError(f"expected 2-D or 3-D pixel array, got ndim={arr.ndim}")
        if arr.size == 0:
            raise GeometryError("empty image")
        if not np.all(np.isfinite(arr)):
            raise GeometryError("image contains non-finite pixel values")
        object.__setattr__(self, "pixels", _freeze(arr))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class PatchPartition:
    """Bijective mapping between an image and its flattened P x P x C patches.

    Patch index i corresponds to grid position (i // grid_cols, i % grid_cols);
    pixel index k within a patch is row-major over (row, col, channel).
    """

    patch_size: int
    grid_rows: int
    grid_cols: int
    channels: int

    def __post_init__(self) -> None:
        for name in ("patch_size", "grid_rows", "grid_cols", "channels"):
            if getattr(self, name) < 1:
                raise GeometryError(f"{name} must be >= 1")

    @property
    def n_patches(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def pixels_per_patch(self) -> int:
        return self.patch_size * self.patch_size * self.channels

    @property
    def height(self) -> int:
        return self.grid_rows * self.patch_size

    @property
    def width(self) -> int:
        return self.grid_cols * self.patch_size

    def matches(self, image: ImageTensor) -> bool:
        return (
            image.height == self.height
            and image.width == self.width
            and image.channels == self.channels
        )

    def patch_matrix(self, image: ImageTensor) -> np.ndarray:
        """Flatten the image into an (N, P*P*C) matrix of patches."""
        if not self.matches(image):
            raise GeometryError(
                f"image {image.pixels.shape} does not match partition "
                f"({self.height}, {self.width}, {self.channels})"
            )
        p = self.patch_size
        arr = image.pixels.reshape(self.grid_rows, p, self.grid_cols, p, self.channels)
        return arr.transpose(0, 2, 1, 3, 4).reshape(self.n_patches, self.pixels_per_patch)

    def assemble(self, patches: np.ndarray) -> ImageTensor:
        """Inverse of :meth:`patch_matrix`; reproduces the image bit-exactly."""
        expected = (self.n_patches, self.pixels_per_patch)
        patches = np.asarray(patches, dtype=np.float64)
        if patches.shape != expected:
            raise GeometryError(f"patch matrix shape {patches.shape}, expected {expected}")
        p = self.patch_size
        arr = patches.reshape(self.grid_rows, self.grid_cols, p, p, self.channels)
        arr = arr.transpose(0, 2, 1, 3, 4).reshape(self.height, self.width, self.channels)
        return ImageTensor(arr)


def partition(image: ImageTensor, patch_size: int) -> PatchPartition:
    """Partition the image into non-overlapping patch_size x patch_size patches."""
    if patch_size < 1:
        raise GeometryError("patch size must be >= 1")
    if image.height % patch_size != 0:
        raise GeometryError(
            f"height {image.height} not divisible by patch size {patch_size}"
        )
    if image.width % patch_size != 0:
        raise GeometryError(
            f"width {image.width} not divisible by patch size {patch_size}"
        )
    return PatchPartition(
        patch_size=patch_size,
        grid_rows=image.height // patch_size,
        grid_cols=image.width // patch_size,
        channels=image.channels,
    )


def pixel_range(image: ImageTensor) -> tuple[float, float]:
    """Return (min, max) over every pixel of the image."""
    if image.pixels.size == 0:
        raise GeometryError("empty image")
    return float(image.pixels.min()), float(image.pixels.max())


def bits_per_depth_field(m_max: int) -> int:
    """Width in bits of one per-patch depth field: ceil(log2(m_max + 1))."""
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    return int(m_max).bit_length()


def side_info_bits(n_patches: int, m_max: int) -> int:
    """Side-information overhead: per-patch depth fields plus two 8-bit range endpoints."""
    if n_patches < 1:
        raise ValueError("n_patches must be >= 1")
    return bits_per_depth_field(m_max) * n_patches + 16


@dataclass(frozen=True, eq=False)
class ImportanceMap:
    """Per-patch importance scores, nonnegative and normalized to sum 1."""

    scores: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ImportanceMap):
            return NotImplemented
        return np.array_equal(self.scores, other.scores)

    def __post_init__(self) -> None:
        arr = np.asarray(self.scores, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("scores must be a non-empty 1-D vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("scores must be finite")
        if np.any(arr < 0):
            raise ValueError("scores must be nonnegative")
        if abs(float(arr.sum()) - 1.0) > 1e-6:
            raise ValueError(
                f"scores must sum to 1 within 1e-6 (got {float(arr.sum())}); "
                "use ImportanceMap.from_raw to normalize"
            )
        object.__setattr__(self, "scores", _freeze(arr))

    @classmethod
    def from_raw(cls, scores: np.ndarray) -> "ImportanceMap":
        """Normalize arbitrary nonnegative scores so they sum to 1."""
        arr = np.asarray(scores, dtype=np.float64)
        total = float(arr.sum())
        if not np.isfinite(total) or total <= 0:
            raise ValueError("scores must have a positive finite sum")
        return cls(arr / total)

    @property
    def n_patches(self) -> int:
        return int(self.scores.size)

    @property
    def score_min(self) -> float:
        return float(self.scores.min())

    @property
    def score_max(self) -> float:
        return float(self.scores.max())


@dataclass(frozen=True)
class Budget:
    """Total bit budget with side-information accounting.

    b_add is the side-info overhead, b_bar = b_target - b_add is what remains
    for payload. Construction rejects budgets that cannot transmit anything
    (b_target <= b_add) and budgets that are not binding (everything would fit
    at m_max anyway).
    """

    b_target: int
    m_max: int
    n_patches: int
    pixels_per_patch: int

    def __post_init__(self) -> None:
        if self.m_max < 1:
            raise BudgetError("m_max must be >= 1")
        if self.n_patches < 1 or self.pixels_per_patch < 1:
            raise BudgetError("geometry counts must be >= 1")
        if self.b_target <= self.b_add:
            raise BudgetError(
                f"b_target={self.b_target} does not exceed side info b_add={self.b_add}; "
                "nothing can be transmitted"
            )
        full = self.pixels_per_patch * self.n_patches * self.m_max
        if full + self.b_add <= self.b_target:
            raise BudgetError(
                f"budget not binding: b_target={self.b_target} admits every patch at "
                f"m_max={self.m_max} (payload {full} + side info {self.b_add})"
            )

    @property
    def b_add(self) -> int:
        return side_info_bits(self.n_patches, self.m_max)

    @property
    def b_bar(self) -> int:
        return self.b_target - self.b_add

    @property
    def q_max(self) -> int:
        return 2 ** self.m_max

    @classmethod
    def for_partition(cls, b_target: int, m_max: int, part: PatchPartition) -> "Budget":
        return cls(
            b_target=int(b_target),
            m_max=int(m_max),
            n_patches=part.n_patches,
            pixels_per_patch=part.pixels_per_patch,
        )

    @classmethod
    def from_compression_ratio(
        cls, rho: float, m_max: int, part: PatchPartition
    ) -> "Budget":
        """Budget whose target is rho times the 8-bit raw image size."""
        raw_bits = 8 * part.height * part.width * part.channels
        return cls.for_partition(int(rho * raw_bits), m_max, part)


@dataclass(frozen=True, eq=False)
class BitAllocation:
    """Per-patch quantization depths plus the payload size they imply."""

    bits_per_patch: np.ndarray
    pixels_per_patch: int

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitAllocation):
            return NotImplemented
        return self.pixels_per_patch == other.pixels_per_patch and np.array_equal(
            self.bits_per_patch, other.bits_per_patch
        )

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits_per_patch)
        if arr.ndim != 1 or arr.size == 0:
            raise GeometryError("bits_per_patch must be a non-empty 1-D vector")
        if not np.issubdtype(arr.dtype, np.integer):
            if not np.all(arr == np.floor(arr)):
                raise GeometryError("bits_per_patch must be integers")
        arr = arr.astype(np.int64)
        if np.any(arr < 0):
            raise GeometryError("bits_per_patch must be nonnegative")
        if self.pixels_per_patch < 1:
            raise GeometryError("pixels_per_patch must be >= 1")
        object.__setattr__(self, "bits_per_patch", _freeze(arr))

    @property
    def n_patches(self) -> int:
        return int(self.bits_per_patch.size)

    @property
    def payload_bits(self) -> int:
        return self.pixels_per_patch * int(self.bits_per_patch.sum())

    def fits(self, budget: Budget) -> bool:
        """True when this allocation satisfies the budget and depth bounds."""
        return (
            self.n_patches == budget.n_patches
            and self.pixels_per_patch == budget.pixels_per_patch
            and int(self.bits_per_patch.max()) <= budget.m_max
            and self.payload_bits + budget.b_add <= budget.b_target
        )


def compression_ratio(allocation: BitAllocation, height: int, width: int, channels: int) -> float:
    """Payload bits divided by the 8-bit raw image size."""
    return allocation.payload_bits / float(8 * height * width * channels)
