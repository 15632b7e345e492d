#!/usr/bin/env python3
"""Generate fixtures and run a small solver-comparison sweep end to end.

Produces a CSV/JSON report grid comparing the optimal incremental solver, both
water-filling variants, and the fixed-depth baseline across compression
targets and channel error levels.
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

from iaq.pipeline import sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", required=True)
    ap.add_argument("--count", type=int, default=5)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    out = Path(args.out_dir)
    fixture_dir = out / "fixtures"
    subprocess.run(
        [
            sys.executable,
            str(Path(__file__).with_name("make_fixtures.py")),
            "--out-dir", str(fixture_dir),
            "--count", str(args.count),
            "--seed", str(args.seed),
        ],
        check=True,
    )
    images = sorted(str(p) for p in fixture_dir.glob("fixture*.pgm"))
    maps = [str(Path(p).with_suffix("").with_suffix("")) + ".attn.json" for p in images]
    config = {
        "images": images,
        "maps": maps,
        "solvers": ["ia", "wf", "ia-mod", "wf-mod", "fixed-q"],
        "rho_targets": [0.125, 0.25, 0.5],
        "mus": [0.0, 0.05],
        "gammas": [1.0],
        "baseline_params": {"q": 2},
        "master_seed": args.seed,
    }
    (out / "sweep_config.json").write_text(json.dumps(config, indent=2))
    result = sweep(config, out)
    print(f"rows: {result.n_rows}, failures: {result.n_failures}")
    print(f"csv: {result.csv_path}")
    print(f"json: {result.json_path}")


if __name__ == "__main__":
    main()
