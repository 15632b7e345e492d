import json

import numpy as np
import pytest

from iaq.imageio import (
    FileFormatError,
    load_importance_map,
    read_image,
    save_importance_map,
    write_pnm,
    write_raw_tensor,
)
from iaq.model import ImageTensor


def test_pgm_round_trip(tmp_path, rng):
    arr = rng.integers(0, 256, (24, 16, 1)).astype(np.float64)
    path = tmp_path / "img.pgm"
    write_pnm(ImageTensor(arr), path)
    back = read_image(path)
    assert np.array_equal(back.pixels, arr)


def test_ppm_round_trip(tmp_path, rng):
    arr = rng.integers(0, 256, (8, 12, 3)).astype(np.float64)
    path = tmp_path / "img.ppm"
    write_pnm(ImageTensor(arr), path)
    assert np.array_equal(read_image(path).pixels, arr)


def test_pnm_header_comments(tmp_path):
    body = bytes(range(6))
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n3 2\n# another\n255\n" + body)
    img = read_image(path)
    assert img.width == 3 and img.height == 2
    assert np.array_equal(img.pixels.ravel(), np.arange(6, dtype=np.float64))


def test_pnm_rejects_16_bit(tmp_path):
    path = tmp_path / "deep.pgm"
    path.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(FileFormatError, match="8-bit"):
        read_image(path)


def test_pnm_rejects_truncated_body(tmp_path):
    path = tmp_path / "short.pgm"
    path.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    with pytest.raises(FileFormatError, match="expected 16"):
        read_image(path)


def test_raw_tensor_round_trip(tmp_path, rng):
    arr = rng.uniform(-2.0, 2.0, (5, 7, 3)).astype(np.float32).astype(np.float64)
    path = tmp_path / "img.iaqt"
    write_raw_tensor(ImageTensor(arr), path)
    back = read_image(path)
    assert np.array_equal(back.pixels, arr)
    assert path.read_bytes()[:4] == b"IAQT"
    assert len(path.read_bytes()) == 16 + 4 * arr.size


def test_unknown_format_rejected(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"not an image")
    with pytest.raises(FileFormatError, match="unrecognized"):
        read_image(path)


def test_importance_map_round_trip(tmp_path):
    scores = np.array([0.1, 0.2, 0.3, 0.4])
    path = tmp_path / "map.json"
    save_importance_map(scores, (2, 2), path)
    imap = load_importance_map(path)
    assert np.allclose(imap.scores, scores)


def test_importance_map_normalized_on_load(tmp_path):
    path = tmp_path / "map.json"
    json.dump(
        {"n_patches": 2, "grid": [1, 2], "scores": [2.0, 6.0]},
        open(path, "w"),
    )
    imap = load_importance_map(path)
    assert np.allclose(imap.scores, [0.25, 0.75])
    assert imap.scores.sum() == pytest.approx(1.0, abs=1e-9)


def test_importance_map_length_mismatch(tmp_path):
    path = tmp_path / "bad.json"
    json.dump({"n_patches": 3, "grid": [1, 3], "scores": [0.5, 0.5]}, open(path, "w"))
    with pytest.raises(FileFormatError, match="2 scores for n_patches=3"):
        load_importance_map(path)


def test_importance_map_grid_mismatch(tmp_path):
    path = tmp_path / "bad.json"
    json.dump({"n_patches": 2, "grid": [2, 2], "scores": [0.5, 0.5]}, open(path, "w"))
    with pytest.raises(FileFormatError, match="grid"):
        load_importance_map(path)
