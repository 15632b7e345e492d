"""Command-line interface: allocate, encode, transmit, decode, run, sweep, levelmap.

All commands exit 0 on success. On failure they print a single JSON object
{"error": <exception type>, "message": <text>} to stderr and exit 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .allocation import SOLVER_NAMES, SolverConfig
from .channel import BER_SCHEMES, ChannelSpec, ber_from_snr, transmit
from .distortion import DistortionParams
from .imageio import load_importance_map, read_image, write_image
from .model import IaqError, compression_ratio, partition, pixel_range
from .pipeline import RunConfig, RunReport, emit_level_map, run_once, run_pipeline, solve_allocation, sweep
from .quantizer import Bitstream, dequantize_image, quantize_image
from .weights import WeightFunctionParams, weight_vector


def _add_weight_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gamma", type=float, default=1.0, help="weight-function shape exponent")
    p.add_argument("--weight-floor", type=float, default=1e-7, help="weight-function floor d")


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--solver", choices=SOLVER_NAMES, required=True)
    p.add_argument("--rho-target", type=float, help="target compression ratio")
    p.add_argument("--b-target", type=int, help="target total bits (overrides --rho-target)")
    p.add_argument("--m-max", type=int, default=8, help="maximum bits per pixel")
    p.add_argument("--mu", type=float, default=0.0, help="channel bit-flip probability")
    _add_weight_args(p)
    p.add_argument("--q", type=int, dest="q_bits", help="fixed-q baseline: bits per pixel")
    p.add_argument("--k", type=float, dest="k_percent", help="top-k baseline: percent of patches")
    p.add_argument("--delta", type=float, help="attention-threshold baseline: score threshold")
    p.add_argument("--delta-sum", type=float, help="attention-sum-threshold baseline: cumulative score threshold")
    p.add_argument("--s-max", type=int, help="water-filling bisection cap")
    p.add_argument("--t-max", type=int, help="water-filling Newton cap")
    p.add_argument("--tau-q", type=float, help="Newton level tolerance")
    p.add_argument("--tau-b", type=float, help="bisection budget tolerance in bits")


def _solver_config(args: argparse.Namespace) -> SolverConfig | None:
    overrides = {}
    if args.s_max is not None:
        overrides["s_max"] = args.s_max
    if args.t_max is not None:
        overrides["t_max"] = args.t_max
    if args.tau_q is not None:
        overrides["tau_q"] = args.tau_q
    if args.tau_b is not None:
        overrides["tau_b"] = args.tau_b
    return SolverConfig(**overrides) if overrides else None


def _run_config(args: argparse.Namespace, seed: int = 0) -> RunConfig:
    return RunConfig(
        solver=args.solver,
        patch_size=args.patch_size,
        m_max=args.m_max,
        gamma=args.gamma,
        weight_floor=args.weight_floor,
        mu=args.mu,
        seed=seed,
        rho_target=args.rho_target,
        b_target=args.b_target,
        q_bits=args.q_bits,
        k_percent=args.k_percent,
        delta=args.delta,
        delta_sum=args.delta_sum,
        solver_config=_solver_config(args),
    )


def _allocation_doc(bits: np.ndarray, grid: tuple[int, int], m_max: int) -> dict:
    return {
        "n_patches": int(bits.size),
        "grid": [int(grid[0]), int(grid[1])],
        "m_max": int(m_max),
        "bits": [int(b) for b in bits],
    }


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _cmd_allocate(args: argparse.Namespace) -> int:
    image = read_image(args.image)
    part = partition(image, args.patch_size)
    imap = load_importance_map(args.map)
    cfg = _run_config(args)
    weights = weight_vector(imap, WeightFunctionParams(cfg.gamma, cfg.weight_floor))
    u_lo, u_hi = pixel_range(image)
    params = DistortionParams.from_range(u_lo, u_hi, part.pixels_per_patch, cfg.mu)
    allocation = solve_allocation(cfg, weights, imap.scores, part, params)
    doc = _allocation_doc(allocation.bits_per_patch, (part.grid_rows, part.grid_cols), cfg.m_max)
    doc["rho"] = compression_ratio(allocation, image.height, image.width, image.channels)
    _write_or_print(json.dumps(doc), args.out)
    return 0


def _load_allocation_bits(path: str) -> np.ndarray:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return np.asarray(doc["bits"], dtype=np.int64)


def _cmd_encode(args: argparse.Namespace) -> int:
    image = read_image(args.image)
    part = partition(image, args.patch_size)
    if not args.allocation and not args.map:
        raise ValueError("encode needs either --map (to allocate) or --allocation")
    if args.allocation:
        from .model import BitAllocation

        allocation = BitAllocation(_load_allocation_bits(args.allocation), part.pixels_per_patch)
    else:
        imap = load_importance_map(args.map)
        cfg = _run_config(args)
        weights = weight_vector(imap, WeightFunctionParams(cfg.gamma, cfg.weight_floor))
        u_lo, u_hi = pixel_range(image)
        params = DistortionParams.from_range(u_lo, u_hi, part.pixels_per_patch, cfg.mu)
        allocation = solve_allocation(cfg, weights, imap.scores, part, params)
    stream = quantize_image(image, allocation, part, args.m_max)
    Path(args.out).write_bytes(stream.to_bytes())
    return 0


def _resolve_mu(args: argparse.Namespace) -> float:
    if args.mu is not None and args.snr_db is not None:
        raise ValueError("give either --mu or --snr-db, not both")
    if args.mu is not None:
        return args.mu
    if args.snr_db is not None:
        return ber_from_snr(args.snr_db, args.scheme)
    raise ValueError("one of --mu or --snr-db is required")


def _cmd_transmit(args: argparse.Namespace) -> int:
    stream = Bitstream.from_bytes(Path(args.infile).read_bytes())
    spec = ChannelSpec(_resolve_mu(args), args.seed)
    received = stream.with_payload(transmit(stream.payload, spec))
    Path(args.out).write_bytes(received.to_bytes())
    return 0


def _cmd_decode(args: argparse.Namespace) -> int:
    stream = Bitstream.from_bytes(Path(args.infile).read_bytes())
    write_image(dequantize_image(stream), args.out)
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _run_config(args, seed=args.seed)
    if args.recon_out:
        image = read_image(args.image)
        imap = load_importance_map(args.map)
        report, recon = run_pipeline(image, imap, cfg)
        write_image(recon, args.recon_out)
    else:
        report = run_once(args.image, args.map, cfg)
    if args.levelmap_base:
        emit_level_map(report, args.levelmap_base)
    _write_or_print(report.to_json(), args.out)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = json.loads(Path(args.config).read_text(encoding="utf-8"))
    result = sweep(config, args.out_dir)
    print(
        json.dumps(
            {
                "csv": str(result.csv_path),
                "json": str(result.json_path),
                "rows": result.n_rows,
                "failures": result.n_failures,
            }
        )
    )
    return 0


def _cmd_levelmap(args: argparse.Namespace) -> int:
    report = RunReport.from_json(Path(args.report).read_text(encoding="utf-8"))
    json_path, pgm_path = emit_level_map(report, args.out_base)
    print(json.dumps({"json": str(json_path), "pgm": str(pgm_path)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iaq",
        description="Importance-aware quantization codec and experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("allocate", help="compute a bit allocation and print it as JSON")
    p.add_argument("--image", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--patch-size", type=int, default=16)
    _add_solver_args(p)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_allocate)

    p = sub.add_parser("encode", help="quantize an image into a bitstream container")
    p.add_argument("--image", required=True)
    p.add_argument("--map", help="importance map (when allocating here)")
    p.add_argument("--allocation", help="precomputed allocation JSON (skips the solver)")
    p.add_argument("--patch-size", type=int, default=16)
    _add_solver_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("transmit", help="pass a container's payload through a BSC")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--mu", type=float, help="bit-flip probability")
    p.add_argument("--snr-db", type=float, help="derive the flip probability from an SNR instead")
    p.add_argument("--scheme", choices=BER_SCHEMES, default="bpsk-awgn")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_transmit)

    p = sub.add_parser("decode", help="dequantize a container back into an image")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True, help=".pgm/.ppm or raw tensor path")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("run", help="full encode -> channel -> decode run with metrics")
    p.add_argument("--image", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--patch-size", type=int, default=16)
    _add_solver_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the report JSON here instead of stdout")
    p.add_argument("--recon-out", help="also write the reconstructed image")
    p.add_argument("--levelmap-base", help="also emit level-map JSON/PGM at this base path")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="run a config-driven experiment grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("levelmap", help="emit level-map JSON/PGM from a run report")
    p.add_argument("--report", required=True)
    p.add_argument("--out-base", required=True)
    p.set_defaults(func=_cmd_levelmap)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (IaqError, ValueError, OSError, KeyError) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
