"""File formats: binary PNM images, raw float tensors, importance-map JSON.

Raw tensor layout: 16-byte header (magic ``IAQT``, u32 height, u32 width,
u32 channels, little-endian) followed by height*width*channels little-endian
float32 values in row-major (row, col, channel) order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import GeometryError, IaqError, ImageTensor, ImportanceMap

RAW_MAGIC = b"IAQT"
_RAW_HEADER = struct.Struct("<4sIII")


class FileFormatError(IaqError, ValueError):
    """Input file is malformed or of an unsupported format."""


def _pnm_tokens(data: bytes):
    """Yield whitespace-separated header tokens, skipping '#' comments."""
    pos = 0
    while pos < len(data):
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            yield data[pos:end], end
            pos = end


def _read_pnm(data: bytes) -> ImageTensor:
    tokens = _pnm_tokens(data)
    try:
        magic, _ = next(tokens)
        (width_tok, _), (height_tok, _), (maxval_tok, end) = (
            next(tokens),
            next(tokens),
            next(tokens),
        )
    except StopIteration:
        raise FileFormatError("truncated PNM header") from None
    channels = {b"P5": 1, b"P6": 3}.get(magic)
    if channels is None:
        raise FileFormatError(f"unsupported PNM magic {magic!r}")
    width, height, maxval = int(width_tok), int(height_tok), int(maxval_tok)
    if maxval <= 0 or maxval > 255:
        raise FileFormatError(f"only 8-bit PNM supported (maxval={maxval})")
    body = data[end + 1 :]
    expected = width * height * channels
    if len(body) < expected:
        raise FileFormatError(
            f"PNM body has {len(body)} bytes, expected {expected}"
        )
    arr = np.frombuffer(body[:expected], dtype=np.uint8).astype(np.float64)
    return ImageTensor(arr.reshape(height, width, channels))


def write_pnm(image: ImageTensor, path: str | Path) -> None:
    """Write a 1-channel image as binary PGM or a 3-channel image as binary PPM.

    Values are rounded to the nearest integer and clipped to [0, 255].
    """
    if image.channels == 1:
        magic = b"P5"
    elif image.channels == 3:
        magic = b"P6"
    else:
        raise GeometryError(f"PNM supports 1 or 3 channels, got {image.channels}")
    body = np.clip(np.rint(image.pixels), 0, 255).astype(np.uint8).tobytes()
    header = magic + f"\n{image.width} {image.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + body)


def _read_raw_tensor(data: bytes) -> ImageTensor:
    if len(data) < _RAW_HEADER.size:
        raise FileFormatError("truncated raw tensor header")
    magic, height, width, channels = _RAW_HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise FileFormatError(f"bad raw tensor magic {magic!r}")
    count = height * width * channels
    body = data[_RAW_HEADER.size :]
    if len(body) != 4 * count:
        raise FileFormatError(
            f"raw tensor body has {len(body)} bytes, expected {4 * count}"
        )
    arr = np.frombuffer(body, dtype="<f4").astype(np.float64)
    return ImageTensor(arr.reshape(height, width, channels))


def write_raw_tensor(image: ImageTensor, path: str | Path) -> None:
    header = _RAW_HEADER.pack(RAW_MAGIC, image.height, image.width, image.channels)
    body = image.pixels.astype("<f4").tobytes()
    Path(path).write_bytes(header + body)


def read_image(path: str | Path) -> ImageTensor:
    """Read a PGM (P5), PPM (P6), or raw IAQT tensor file."""
    data = Path(path).read_bytes()
    if data[:2] in (b"P5", b"P6"):
        return _read_pnm(data)
    if data[:4] == RAW_MAGIC:
        return _read_raw_tensor(data)
    raise FileFormatError(f"unrecognized image format in {path}")


def write_image(image: ImageTensor, path: str | Path) -> None:
    """Write by extension: .pgm/.ppm as binary PNM, anything else as raw tensor."""
    suffix = Path(path).suffix.lower()
    if suffix in (".pgm", ".ppm"):
        write_pnm(image, path)
    else:
        write_raw_tensor(image, path)


def load_importance_map(path: str | Path) -> ImportanceMap:
    """Load and normalize an importance-map JSON file.

    Schema: {"n_patches": int, "grid": [rows, cols], "scores": [float, ...]}
    with len(scores) == n_patches == rows * cols.
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        n_patches = int(doc["n_patches"])
        grid = doc["grid"]
        scores = doc["scores"]
    except (KeyError, TypeError) as exc:
        raise FileFormatError(f"importance map {path} missing field: {exc}") from None
    if len(scores) != n_patches:
        raise FileFormatError(
            f"importance map {path}: {len(scores)} scores for n_patches={n_patches}"
        )
    if len(grid) != 2 or int(grid[0]) * int(grid[1]) != n_patches:
        raise FileFormatError(
            f"importance map {path}: grid {grid} inconsistent with n_patches={n_patches}"
        )
    return ImportanceMap.from_raw(np.asarray(scores, dtype=np.float64))


def save_importance_map(
    scores: np.ndarray, grid: tuple[int, int], path: str | Path
) -> None:
    scores = np.asarray(scores, dtype=np.float64)
    doc = {
        "n_patches": int(scores.size),
        "grid": [int(grid[0]), int(grid[1])],
        "scores": [float(s) for s in scores],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
