"""Minimal image loading for the extractor: binary PNM and raw float tensors.

Returns float arrays scaled to [0, 1], shaped (H, W, 3); grayscale inputs are
replicated across channels. Raw tensors (magic ``IAQT``) carry arbitrary
value ranges and are min-max scaled.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_RAW_HEADER = struct.Struct("<4sIII")


def _pnm_tokens(data: bytes):
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


def _read_pnm(data: bytes) -> np.ndarray:
    tokens = _pnm_tokens(data)
    magic, _ = next(tokens)
    (w, _), (h, _), (maxval, end) = next(tokens), next(tokens), next(tokens)
    channels = {b"P5": 1, b"P6": 3}[magic]
    width, height, maxval = int(w), int(h), int(maxval)
    if maxval <= 0 or maxval > 255:
        raise ValueError(f"only 8-bit PNM supported (maxval={maxval})")
    body = data[end + 1 : end + 1 + width * height * channels]
    arr = np.frombuffer(body, dtype=np.uint8).astype(np.float32)
    arr = arr.reshape(height, width, channels) / float(maxval)
    return arr


def _read_raw(data: bytes) -> np.ndarray:
    _, height, width, channels = _RAW_HEADER.unpack_from(data)
    arr = np.frombuffer(data, dtype="<f4", offset=_RAW_HEADER.size)
    arr = arr.reshape(height, width, channels).astype(np.float32)
    lo, hi = float(arr.min()), float(arr.max())
    if hi > lo:
        arr = (arr - lo) / (hi - lo)
    else:
        arr = np.zeros_like(arr)
    return arr


def load_image_unit_scale(path: str | Path) -> np.ndarray:
    """Read a PGM/PPM/raw-tensor file into an (H, W, 3) float array in [0, 1]."""
    data = Path(path).read_bytes()
    if data[:2] in (b"P5", b"P6"):
        arr = _read_pnm(data)
    elif data[:4] == b"IAQT":
        arr = _read_raw(data)
    else:
        raise ValueError(f"unrecognized image format in {path}")
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    elif arr.shape[2] != 3:
        raise ValueError(f"expected 1 or 3 channels, got {arr.shape[2]}")
    return arr
