#!/usr/bin/env python3
"""Generate sample images and synthetic importance maps for experiments.

Each fixture is a PGM (grayscale) or PPM (color) image plus an importance-map
JSON whose high-score patches form a contiguous blob, mimicking an
object-centric attention map.
"""

import argparse
from pathlib import Path

import numpy as np

from iaq.imageio import save_importance_map, write_pnm
from iaq.model import ImageTensor


def blob_scores(rng, grid_rows, grid_cols):
    yy, xx = np.mgrid[0:grid_rows, 0:grid_cols]
    cy = rng.uniform(0.25 * grid_rows, 0.75 * grid_rows)
    cx = rng.uniform(0.25 * grid_cols, 0.75 * grid_cols)
    sigma = rng.uniform(0.15, 0.35) * min(grid_rows, grid_cols)
    bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma**2))
    scores = bump * rng.uniform(2.0, 5.0) + rng.uniform(0.0, 0.2, bump.shape)
    return scores.ravel() / scores.sum()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", required=True)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--size", type=int, default=64, help="image side length (multiple of patch size)")
    ap.add_argument("--channels", type=int, default=1, choices=(1, 3))
    ap.add_argument("--patch-size", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if args.size % args.patch_size:
        ap.error(f"size {args.size} not divisible by patch size {args.patch_size}")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    grid = args.size // args.patch_size
    for i in range(args.count):
        pixels = rng.integers(0, 256, (args.size, args.size, args.channels)).astype(float)
        suffix = ".pgm" if args.channels == 1 else ".ppm"
        img_path = out / f"fixture{i:03d}{suffix}"
        write_pnm(ImageTensor(pixels), img_path)
        scores = blob_scores(rng, grid, grid)
        save_importance_map(scores, (grid, grid), out / f"fixture{i:03d}.attn.json")
        print(f"wrote {img_path} and its importance map")


if __name__ == "__main__":
    main()
