"""CLI: extract importance maps from a directory (or list) of images."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .extractor import DEFAULT_MODEL, AttentionExtractor, ExtractorConfig

IMAGE_SUFFIXES = (".pgm", ".ppm", ".iaqt")


def collect_images(path: Path) -> list[Path]:
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    return [path]


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="iaq-extract",
        description="Write per-patch mean attention scores as importance-map JSON",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="extract maps for one image or a directory")
    p.add_argument("--model", default=DEFAULT_MODEL, help="model id or local checkpoint path")
    p.add_argument("--images", required=True, help="image file or directory")
    p.add_argument("--out", required=True, help="output directory for .attn.json files")
    p.add_argument("--layer", type=int, default=-1, help="attention layer index (default: last)")
    p.add_argument("--image-size", type=int, default=224)
    p.add_argument("--patch-size", type=int, default=16)
    p.add_argument("--device", default="cpu")
    args = ap.parse_args(argv)

    try:
        config = ExtractorConfig(
            model_id=args.model,
            layer_index=args.layer,
            image_size=args.image_size,
            patch_size=args.patch_size,
            device=args.device,
        )
        extractor = AttentionExtractor(config)
        images = collect_images(Path(args.images))
        if not images:
            raise ValueError(f"no images found under {args.images}")
        written = extractor.extract_batch(images, args.out)
    except (ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
