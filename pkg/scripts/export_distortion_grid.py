#!/usr/bin/env python3
"""Export a (mu, Q, distortion) CSV grid of the closed-form distortion model.

Useful for plotting how the expected-distortion bound behaves across
quantization levels and flip probabilities.
"""

import argparse

import numpy as np

from iaq.distortion import DistortionParams, export_distortion_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--pixels-per-patch", type=int, default=768)
    ap.add_argument("--u-range", type=float, default=255.0)
    ap.add_argument("--m-max", type=int, default=8)
    ap.add_argument(
        "--mus", type=float, nargs="+", default=[0.0, 0.01, 0.05, 0.1, 0.2]
    )
    args = ap.parse_args()

    params = DistortionParams.from_range(0.0, args.u_range, args.pixels_per_patch, 0.0)
    q_values = 2.0 ** np.arange(args.m_max + 1)
    export_distortion_grid(args.out, params, q_values, args.mus)
    print(f"wrote {args.out}: {len(args.mus)} mu values x {len(q_values)} levels")


if __name__ == "__main__":
    main()
