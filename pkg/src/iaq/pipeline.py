"""End-to-end encode -> channel -> decode runs, metrics, and experiment sweeps.

A run allocates bits from an importance map, quantizes the image, pushes the
payload through a binary symmetric channel, decodes, and reports metrics. The
error-free solvers (ia, wf) always optimize the mu = 0 objective even when the
channel is noisy; the modified solvers (ia-mod, wf-mod) optimize at the
channel's flip probability. The reported objective is always evaluated at the
channel's flip probability.

Sweeps run the cartesian product of (solver, rho_target, mu, gamma) over a
fixture set with per-cell seeds derived deterministically from a master seed;
the CSV output contains no timing data, so identical configs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .allocation import (
    SOLVER_NAMES,
    SolverConfig,
    allocate_fixed_q,
    allocate_incremental,
    allocate_sum_threshold,
    allocate_threshold,
    allocate_top_k,
    allocate_waterfilling,
    allocate_waterfilling_modified,
    objective,
)
from .channel import ChannelSpec, transmit
from .distortion import DistortionParams
from .imageio import load_importance_map, read_image, write_pnm
from .model import (
    BitAllocation,
    Budget,
    GeometryError,
    IaqError,
    ImageTensor,
    ImportanceMap,
    PatchPartition,
    compression_ratio,
    partition,
    pixel_range,
    side_info_bits,
)
from .quantizer import dequantize_image, float32_range_envelope, quantize_image
from .weights import WeightFunctionParams, weight_vector


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one pipeline run, minus the input files."""

    solver: str
    patch_size: int = 16
    m_max: int = 8
    gamma: float = 1.0
    weight_floor: float = 1e-7
    mu: float = 0.0
    seed: int = 0
    rho_target: float | None = None
    b_target: int | None = None
    q_bits: int | None = None
    k_percent: float | None = None
    delta: float | None = None
    delta_sum: float | None = None
    solver_config: SolverConfig | None = None

    def __post_init__(self) -> None:
        if self.solver not in SOLVER_NAMES:
            raise ValueError(
                f"unknown solver {self.solver!r}; expected one of {SOLVER_NAMES}"
            )


@dataclass
class RunReport:
    """Metrics and provenance of one encode -> channel -> decode run."""

    solver: str
    mu: float
    gamma: float
    seed: int
    height: int
    width: int
    channels: int
    patch_size: int
    m_max: int
    grid_rows: int
    grid_cols: int
    rho_target: float | None
    b_target: int | None
    b_add: int
    payload_bits: int
    rho: float
    objective: float
    mse: float
    psnr: float
    u_min: float
    u_max: float
    bits_per_patch: list[int]
    wall_time_s: float

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "RunReport":
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        return cls.from_dict(json.loads(text))


def resolve_budget(cfg: RunConfig, part: PatchPartition) -> Budget | None:
    """Budget from b_target (preferred) or rho_target; None if neither is set."""
    if cfg.b_target is not None:
        return Budget.for_partition(cfg.b_target, cfg.m_max, part)
    if cfg.rho_target is not None:
        return Budget.from_compression_ratio(cfg.rho_target, cfg.m_max, part)
    return None


def _require(value, name: str, solver: str):
    if value is None:
        raise ValueError(f"solver {solver!r} requires {name}")
    return value


def solve_allocation(
    cfg: RunConfig,
    weights: np.ndarray,
    scores: np.ndarray,
    part: PatchPartition,
    params: DistortionParams,
) -> BitAllocation:
    """Dispatch to the requested solver or baseline."""
    solver = cfg.solver
    ppp = part.pixels_per_patch
    if solver in ("ia", "wf", "ia-mod", "wf-mod"):
        budget = resolve_budget(cfg, part)
        if budget is None:
            raise ValueError(f"solver {solver!r} requires rho_target or b_target")
        solver_params = params.with_mu(0.0) if solver in ("ia", "wf") else params
        if solver == "ia" or solver == "ia-mod":
            return allocate_incremental(weights, budget, solver_params)
        if solver == "wf":
            return allocate_waterfilling(
                weights, budget, solver_params, scores, cfg.solver_config
            ).allocation
        return allocate_waterfilling_modified(
            weights, budget, solver_params, scores, cfg.solver_config
        ).allocation
    if solver == "fixed-q":
        q_bits = _require(cfg.q_bits, "q_bits", solver)
        return allocate_fixed_q(q_bits, part.n_patches, ppp)
    if solver == "top-k":
        k = _require(cfg.k_percent, "k_percent", solver)
        return allocate_top_k(scores, k, cfg.m_max, ppp)
    if solver == "at":
        delta = _require(cfg.delta, "delta", solver)
        return allocate_threshold(scores, delta, cfg.m_max, ppp)
    if solver == "ast":
        delta_sum = _require(cfg.delta_sum, "delta_sum", solver)
        return allocate_sum_threshold(scores, delta_sum, cfg.m_max, ppp)
    raise ValueError(f"unknown solver {solver!r}")


def run_pipeline(
    image: ImageTensor, imap: ImportanceMap, cfg: RunConfig
) -> tuple[RunReport, ImageTensor]:
    """Run allocate -> quantize -> transmit -> dequantize on in-memory inputs.

    Returns the report and the reconstructed image.
    """
    start = time.perf_counter()
    part = partition(image, cfg.patch_size)
    if imap.n_patches != part.n_patches:
        raise GeometryError(
            f"importance map has {imap.n_patches} scores, partition has "
            f"{part.n_patches} patches"
        )
    wparams = WeightFunctionParams(cfg.gamma, cfg.weight_floor)
    weights = weight_vector(imap, wparams)
    u_lo, u_hi = float32_range_envelope(*pixel_range(image))
    params = DistortionParams.from_range(u_lo, u_hi, part.pixels_per_patch, cfg.mu)
    allocation = solve_allocation(cfg, weights, imap.scores, part, params)
    stream = quantize_image(image, allocation, part, cfg.m_max, value_range=(u_lo, u_hi))
    received = stream.with_payload(transmit(stream.payload, ChannelSpec(cfg.mu, cfg.seed)))
    recon = dequantize_image(received)
    mse = float(np.mean((image.pixels - recon.pixels) ** 2))
    peak = u_hi - u_lo
    psnr = math.inf if mse == 0.0 else 10.0 * math.log10(peak * peak / mse)
    budget = resolve_budget(cfg, part)
    report = RunReport(
        solver=cfg.solver,
        mu=cfg.mu,
        gamma=cfg.gamma,
        seed=cfg.seed,
        height=image.height,
        width=image.width,
        channels=image.channels,
        patch_size=cfg.patch_size,
        m_max=cfg.m_max,
        grid_rows=part.grid_rows,
        grid_cols=part.grid_cols,
        rho_target=cfg.rho_target,
        b_target=budget.b_target if budget is not None else None,
        b_add=side_info_bits(part.n_patches, cfg.m_max),
        payload_bits=allocation.payload_bits,
        rho=compression_ratio(allocation, image.height, image.width, image.channels),
        objective=objective(allocation.bits_per_patch, weights, params),
        mse=mse,
        psnr=psnr,
        u_min=u_lo,
        u_max=u_hi,
        bits_per_patch=[int(b) for b in allocation.bits_per_patch],
        wall_time_s=time.perf_counter() - start,
    )
    return report, recon


def run_once(image_path: str | Path, map_path: str | Path, cfg: RunConfig) -> RunReport:
    """File-based pipeline run; see run_pipeline for the in-memory variant."""
    image = read_image(image_path)
    imap = load_importance_map(map_path)
    report, _ = run_pipeline(image, imap, cfg)
    return report


def emit_level_map(report: RunReport, out_base: str | Path) -> tuple[Path, Path]:
    """Write the per-patch depth grid as JSON and as an 8-bit PGM.

    PGM pixel values are round(m * 255 / m_max) so depth 0 is black and depth
    m_max is white.
    """
    out_base = Path(out_base)
    bits = np.asarray(report.bits_per_patch, dtype=np.int64)
    grid = bits.reshape(report.grid_rows, report.grid_cols)
    json_path = out_base.with_suffix(".json")
    doc = {
        "n_patches": int(bits.size),
        "grid": [report.grid_rows, report.grid_cols],
        "m_max": report.m_max,
        "bits": [int(b) for b in bits],
    }
    json_path.write_text(json.dumps(doc) + "\n", encoding="utf-8")
    pgm_path = out_base.with_suffix(".pgm")
    shade = np.rint(grid * 255.0 / report.m_max)
    write_pnm(ImageTensor(shade[:, :, np.newaxis]), pgm_path)
    return json_path, pgm_path


SWEEP_CSV_COLUMNS = [
    "solver",
    "rho_target",
    "mu",
    "gamma",
    "image",
    "seed",
    "status",
    "error",
    "rho",
    "b_target",
    "b_add",
    "payload_bits",
    "objective",
    "mse",
    "psnr",
]

_AGGREGATE_FIELDS = ("rho", "payload_bits", "objective", "mse", "psnr")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class SweepResult:
    csv_path: Path
    json_path: Path
    n_rows: int
    n_failures: int


def _sweep_cells(config: dict) -> list[tuple]:
    images = config.get("images", [])
    maps = config.get("maps", [])
    if len(images) != len(maps):
        raise ValueError("sweep config must pair each image with one importance map")
    solvers = config.get("solvers", [])
    rhos = config.get("rho_targets", [])
    mus = config.get("mus", [])
    gammas = config.get("gammas", [])
    cells = []
    for solver in solvers:
        for rho in rhos:
            for mu in mus:
                for gamma in gammas:
                    for idx, (img, mp) in enumerate(zip(images, maps)):
                        cells.append((str(solver), float(rho), float(mu), float(gamma), idx, str(img), str(mp)))
    cells.sort(key=lambda c: (c[0], c[1], c[2], c[3], c[4]))
    return cells


def sweep(config: dict, out_dir: str | Path, csv_name: str = "sweep.csv", json_name: str = "sweep.json") -> SweepResult:
    """Run every grid cell, write one CSV row per run plus per-group means.

    Cell failures are recorded in-row (status "error") and excluded from the
    aggregate rows; the sweep itself keeps going. Identical config and
    master_seed reproduce the CSV byte for byte.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    master_seed = int(config.get("master_seed", 0))
    m_max = int(config.get("m_max", 8))
    patch_size = int(config.get("patch_size", 16))
    weight_floor = float(config.get("weight_floor", 1e-7))
    baseline = config.get("baseline_params", {})
    solver_cfg = None
    if "solver_config" in config:
        solver_cfg = SolverConfig(**config["solver_config"])
    cells = _sweep_cells(config)
    rows: list[dict] = []
    reports: list[dict] = []
    failures = 0
    for cell_index, (solver, rho, mu, gamma, _img_idx, img_path, map_path) in enumerate(cells):
        seed = int(
            np.random.SeedSequence(entropy=master_seed, spawn_key=(cell_index,))
            .generate_state(1, np.uint64)[0]
        )
        row = {
            "solver": solver,
            "rho_target": rho,
            "mu": mu,
            "gamma": gamma,
            "image": Path(img_path).name,
            "seed": seed,
            "status": "ok",
            "error": None,
        }
        cfg = RunConfig(
            solver=solver,
            patch_size=patch_size,
            m_max=m_max,
            gamma=gamma,
            weight_floor=weight_floor,
            mu=mu,
            seed=seed,
            rho_target=rho,
            q_bits=baseline.get("q"),
            k_percent=baseline.get("k"),
            delta=baseline.get("delta"),
            delta_sum=baseline.get("delta_sum"),
            solver_config=solver_cfg,
        )
        try:
            report = run_once(img_path, map_path, cfg)
        except (IaqError, ValueError, OSError) as exc:
            row["status"] = "error"
            row["error"] = f"{type(exc).__name__}: {exc}"
            for key in ("rho", "b_target", "b_add", "payload_bits", "objective", "mse", "psnr"):
                row[key] = None
            failures += 1
        else:
            row.update(
                rho=report.rho,
                b_target=report.b_target,
                b_add=report.b_add,
                payload_bits=report.payload_bits,
                objective=report.objective,
                mse=report.mse,
                psnr=report.psnr,
            )
            reports.append(report.to_dict())
        rows.append(row)

    aggregates: list[dict] = []
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        key = (row["solver"], row["rho_target"], row["mu"], row["gamma"])
        groups.setdefault(key, []).append(row)
    for key in sorted(groups):
        members = groups[key]
        agg = {
            "solver": key[0],
            "rho_target": key[1],
            "mu": key[2],
            "gamma": key[3],
            "image": "(mean)",
            "seed": None,
            "status": "aggregate",
            "error": None,
            "b_target": None,
            "b_add": None,
        }
        for metric in _AGGREGATE_FIELDS:
            agg[metric] = float(np.mean([m[metric] for m in members]))
        aggregates.append(agg)

    csv_path = out_dir / csv_name
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_CSV_COLUMNS)
        for row in rows + aggregates:
            writer.writerow([_fmt(row.get(col)) for col in SWEEP_CSV_COLUMNS])

    json_path = out_dir / json_name
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump({"config": config, "reports": reports}, fh, indent=2)
        fh.write("\n")
    return SweepResult(csv_path=csv_path, json_path=json_path, n_rows=len(rows), n_failures=failures)
