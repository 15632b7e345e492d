"""Patch-wise uniform quantization, binary index coding, and the bitstream container.

A depth-M codebook over [u_min, u_max] has step size delta = (u_max - u_min) / 2**M
and reconstruction levels u_min + (s + 1/2) * delta for s in 0 .. 2**M - 1. Indices
are coded as natural binary, most-significant bit first. The per-pixel codes are
concatenated patch-major, pixel-minor, with no padding anywhere inside the
payload; only the serialized container pads its final byte.

Container layout (little-endian), version 1:

    magic "IAQB" | u8 version | u32 H | u32 W | u32 C | u16 P | u8 m_max
    | f32 u_min | f32 u_max
    | N fields of ceil(log2(m_max+1)) bits each, the per-patch depths, MSB first
    | payload bits
    | zero padding to the next byte boundary

The depth fields and payload form one continuous bit string. u_min/u_max are
stored as float32 for precision; the 8+8 bits charged by the side-info
accounting are unaffected by this on-disk choice.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .model import (
    BitAllocation,
    GeometryError,
    IaqError,
    ImageTensor,
    PatchPartition,
    bits_per_depth_field,
    pixel_range,
)

STREAM_MAGIC = b"IAQB"
STREAM_VERSION = 1
_STREAM_HEADER = struct.Struct("<4sBIIIHBff")


class BitstreamError(IaqError, ValueError):
    """Bitstream container is malformed, truncated, or inconsistent."""


@dataclass(frozen=True)
class Codebook:
    """Uniform quantizer with 2**m_bits reconstruction levels on [u_min, u_max]."""

    m_bits: int
    u_min: float
    u_max: float

    def __post_init__(self) -> None:
        if self.m_bits < 0:
            raise ValueError("m_bits must be >= 0")
        if self.u_max < self.u_min:
            raise ValueError("u_max must be >= u_min")

    @property
    def n_levels(self) -> int:
        return 2 ** self.m_bits

    @property
    def step(self) -> float:
        return (self.u_max - self.u_min) / self.n_levels

    @property
    def levels(self) -> np.ndarray:
        return self.u_min + (np.arange(self.n_levels) + 0.5) * self.step

    def level(self, index: int) -> float:
        if not 0 <= index < self.n_levels:
            raise ValueError(f"index {index} out of range for {self.n_levels} levels")
        return self.u_min + (index + 0.5) * self.step


def quantize_indices(values: np.ndarray, codebook: Codebook) -> np.ndarray:
    """Nearest-level indices for an array of values.

    Values outside [u_min, u_max] (floating error) are clamped first. A value
    exactly on a cell boundary is equidistant from two levels; the smaller
    index wins, so cells are left-open: (u_min + s*delta, u_min + (s+1)*delta].
    """
    arr = np.clip(np.asarray(values, dtype=np.float64), codebook.u_min, codebook.u_max)
    step = codebook.step
    if step == 0.0:
        return np.zeros(arr.shape, dtype=np.int64)
    t = (arr - codebook.u_min) / step
    return np.clip(np.ceil(t).astype(np.int64) - 1, 0, codebook.n_levels - 1)


def quantize_pixel(u: float, codebook: Codebook) -> tuple[int, float]:
    """Quantize one value; returns (index, reconstruction level)."""
    if not np.isfinite(u):
        raise ValueError("pixel value must be finite")
    s = int(quantize_indices(np.asarray([u]), codebook)[0])
    return s, codebook.level(s)


def encode_index(s: int, m_bits: int) -> np.ndarray:
    """Natural binary code of s, MSB first, as a length-m_bits 0/1 vector."""
    if m_bits < 0:
        raise ValueError("m_bits must be >= 0")
    if not 0 <= s < 2 ** m_bits:
        raise ValueError(f"index {s} out of range for {m_bits} bits")
    if m_bits == 0:
        return np.zeros(0, dtype=np.uint8)
    shifts = np.arange(m_bits - 1, -1, -1)
    return ((s >> shifts) & 1).astype(np.uint8)


def decode_bits(bits: np.ndarray, codebook: Codebook) -> float:
    """Reconstruction level for an MSB-first code of length codebook.m_bits."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size != codebook.m_bits:
        raise BitstreamError(
            f"code length {bits.size} does not match depth {codebook.m_bits}"
        )
    if codebook.m_bits == 0:
        return codebook.level(0)
    weights = 1 << np.arange(codebook.m_bits - 1, -1, -1, dtype=np.int64)
    return codebook.level(int(bits @ weights))


def float32_range_envelope(u_min: float, u_max: float) -> tuple[float, float]:
    """Smallest float32-representable interval containing [u_min, u_max].

    The container stores range endpoints as float32; widening (never shrinking)
    the interval keeps every pixel inside it so the half-step error bound holds
    with the stored endpoints.
    """
    lo = np.float32(u_min)
    hi = np.float32(u_max)
    if float(lo) > u_min:
        lo = np.nextafter(lo, np.float32(-np.inf))
    if float(hi) < u_max:
        hi = np.nextafter(hi, np.float32(np.inf))
    return float(lo), float(hi)


@dataclass(frozen=True, eq=False)
class Bitstream:
    """Side info plus payload bits produced by the patch quantizer.

    The payload is kept as an unpacked array of 0/1 bytes so the channel
    simulator can flip bits elementwise; packing happens only in to_bytes().
    """

    height: int
    width: int
    channels: int
    patch_size: int
    m_max: int
    u_min: float
    u_max: float
    bits_per_patch: np.ndarray
    payload: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Bitstream):
            return NotImplemented
        return (
            (self.height, self.width, self.channels, self.patch_size, self.m_max)
            == (other.height, other.width, other.channels, other.patch_size, other.m_max)
            and self.u_min == other.u_min
            and self.u_max == other.u_max
            and np.array_equal(self.bits_per_patch, other.bits_per_patch)
            and np.array_equal(self.payload, other.payload)
        )

    def __post_init__(self) -> None:
        if self.patch_size < 1 or self.m_max < 1:
            raise BitstreamError("patch_size and m_max must be >= 1")
        if self.height % self.patch_size or self.width % self.patch_size:
            raise BitstreamError("image dimensions not divisible by patch size")
        depths = np.asarray(self.bits_per_patch, dtype=np.int64)
        if depths.size != self.n_patches:
            raise BitstreamError(
                f"{depths.size} depth fields for {self.n_patches} patches"
            )
        if np.any(depths < 0) or np.any(depths > self.m_max):
            raise BitstreamError(f"patch depths must lie in [0, {self.m_max}]")
        payload = np.asarray(self.payload, dtype=np.uint8)
        expected = self.pixels_per_patch * int(depths.sum())
        if payload.size != expected:
            raise BitstreamError(
                f"payload has {payload.size} bits, side info implies {expected}"
            )
        if payload.size and payload.max() > 1:
            raise BitstreamError("payload must contain only 0/1 values")
        object.__setattr__(self, "bits_per_patch", depths)
        object.__setattr__(self, "payload", payload)
        for arr in (depths, payload):
            arr.setflags(write=False)

    @property
    def grid_rows(self) -> int:
        return self.height // self.patch_size

    @property
    def grid_cols(self) -> int:
        return self.width // self.patch_size

    @property
    def n_patches(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def pixels_per_patch(self) -> int:
        return self.patch_size * self.patch_size * self.channels

    @property
    def payload_bits(self) -> int:
        return int(self.payload.size)

    def partition(self) -> PatchPartition:
        return PatchPartition(
            patch_size=self.patch_size,
            grid_rows=self.grid_rows,
            grid_cols=self.grid_cols,
            channels=self.channels,
        )

    def allocation(self) -> BitAllocation:
        return BitAllocation(self.bits_per_patch, self.pixels_per_patch)

    def with_payload(self, payload: np.ndarray) -> "Bitstream":
        """Copy of this stream with the payload replaced (e.g. after a channel)."""
        return replace(self, payload=payload)

    def to_bytes(self) -> bytes:
        header = _STREAM_HEADER.pack(
            STREAM_MAGIC,
            STREAM_VERSION,
            self.height,
            self.width,
            self.channels,
            self.patch_size,
            self.m_max,
            np.float32(self.u_min),
            np.float32(self.u_max),
        )
        width = bits_per_depth_field(self.m_max)
        shifts = np.arange(width - 1, -1, -1)
        side = ((self.bits_per_patch[:, None] >> shifts) & 1).astype(np.uint8).ravel()
        stream_bits = np.concatenate([side, self.payload])
        return header + np.packbits(stream_bits).tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        if len(data) < _STREAM_HEADER.size:
            raise BitstreamError("truncated container header")
        magic, version, height, width, channels, patch_size, m_max, u_min, u_max = (
            _STREAM_HEADER.unpack_from(data)
        )
        if magic != STREAM_MAGIC:
            raise BitstreamError(f"bad container magic {magic!r}")
        if version != STREAM_VERSION:
            raise BitstreamError(f"unsupported container version {version}")
        if patch_size < 1 or height % patch_size or width % patch_size:
            raise BitstreamError("invalid geometry in container header")
        n_patches = (height // patch_size) * (width // patch_size)
        field_width = bits_per_depth_field(m_max)
        body = np.frombuffer(data, dtype=np.uint8, offset=_STREAM_HEADER.size)
        bits = np.unpackbits(body)
        side_bits = n_patches * field_width
        if bits.size < side_bits:
            raise BitstreamError("container truncated inside side info")
        shifts = np.arange(field_width - 1, -1, -1, dtype=np.int64)
        depths = bits[:side_bits].reshape(n_patches, field_width).astype(np.int64) @ (
            1 << shifts
        )
        if np.any(depths > m_max):
            raise BitstreamError("per-patch depth exceeds m_max")
        pixels_per_patch = patch_size * patch_size * channels
        payload_bits = pixels_per_patch * int(depths.sum())
        total_bits = side_bits + payload_bits
        expected_bytes = (total_bits + 7) // 8
        actual_bytes = len(data) - _STREAM_HEADER.size
        if actual_bytes < expected_bytes:
            raise BitstreamError(
                f"container truncated: {actual_bytes} body bytes, need {expected_bytes}"
            )
        if actual_bytes > expected_bytes:
            raise BitstreamError(
                f"container oversized: {actual_bytes} body bytes, expected {expected_bytes}"
            )
        payload = bits[side_bits : side_bits + payload_bits]
        return cls(
            height=height,
            width=width,
            channels=channels,
            patch_size=patch_size,
            m_max=m_max,
            u_min=float(u_min),
            u_max=float(u_max),
            bits_per_patch=depths,
            payload=payload,
        )


def quantize_image(
    image: ImageTensor,
    allocation: BitAllocation,
    part: PatchPartition,
    m_max: int = 8,
    value_range: tuple[float, float] | None = None,
) -> Bitstream:
    """Quantize every patch at its allocated depth and pack the payload.

    The range endpoints are widened to their float32 envelope so the container
    round-trips bit-exactly; the same endpoints drive the codebooks here and in
    dequantize_image.
    """
    if allocation.n_patches != part.n_patches:
        raise GeometryError(
            f"{allocation.n_patches} allocated patches for partition of {part.n_patches}"
        )
    if allocation.pixels_per_patch != part.pixels_per_patch:
        raise GeometryError("allocation and partition disagree on pixels per patch")
    if int(allocation.bits_per_patch.max()) > m_max:
        raise GeometryError("allocation exceeds m_max")
    if value_range is None:
        value_range = pixel_range(image)
    u_min, u_max = float32_range_envelope(*value_range)
    patches = part.patch_matrix(image)
    chunks: list[np.ndarray] = []
    for i in range(part.n_patches):
        m = int(allocation.bits_per_patch[i])
        if m == 0:
            continue
        book = Codebook(m, u_min, u_max)
        idx = quantize_indices(patches[i], book)
        shifts = np.arange(m - 1, -1, -1)
        chunks.append(((idx[:, None] >> shifts) & 1).astype(np.uint8).ravel())
    payload = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.uint8)
    return Bitstream(
        height=image.height,
        width=image.width,
        channels=image.channels,
        patch_size=part.patch_size,
        m_max=m_max,
        u_min=u_min,
        u_max=u_max,
        bits_per_patch=allocation.bits_per_patch,
        payload=payload,
    )


def dequantize_image(stream: Bitstream) -> ImageTensor:
    """Decode every patch back to reconstruction levels and reassemble the image.

    Exact inverse of the bit packing; pixel values land on codebook levels, so
    they always lie inside [u_min, u_max] even for corrupted payloads.
    """
    part = stream.partition()
    ppp = part.pixels_per_patch
    patches = np.empty((part.n_patches, ppp), dtype=np.float64)
    offset = 0
    for i in range(part.n_patches):
        m = int(stream.bits_per_patch[i])
        book = Codebook(m, stream.u_min, stream.u_max)
        if m == 0:
            patches[i] = book.level(0)
            continue
        n_bits = ppp * m
        codes = stream.payload[offset : offset + n_bits].reshape(ppp, m)
        offset += n_bits
        weights = 1 << np.arange(m - 1, -1, -1, dtype=np.int64)
        idx = codes.astype(np.int64) @ weights
        patches[i] = stream.u_min + (idx + 0.5) * book.step
    return part.assemble(patches)
