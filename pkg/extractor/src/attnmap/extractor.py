"""Mean class-token attention extraction from a pretrained vision transformer.

For each attention head at the chosen layer, the class token's softmax row is
restricted to the patch-token columns and renormalized (stock models keep the
class token, and for distilled models the distillation token, among the keys),
then the rows are averaged over heads. The result is one nonnegative score per
image patch, summing to 1, written in the codec's importance-map JSON schema.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from transformers import AutoModel

from .images import load_image_unit_scale

DEFAULT_MODEL = "facebook/deit-tiny-distilled-patch16-224"
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class ExtractorConfig:
    """Model choice and geometry for attention extraction."""

    model_id: str = DEFAULT_MODEL
    layer_index: int = -1
    image_size: int = 224
    patch_size: int = 16
    device: str = "cpu"
    norm_mean: tuple[float, float, float] = IMAGENET_MEAN
    norm_std: tuple[float, float, float] = IMAGENET_STD

    def __post_init__(self) -> None:
        if self.image_size % self.patch_size:
            raise ValueError(
                f"image size {self.image_size} not divisible by patch size {self.patch_size}"
            )

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def n_patches(self) -> int:
        return self.grid * self.grid


class AttentionExtractor:
    """Wraps a loaded ViT-family model and turns images into importance maps."""

    def __init__(self, config: ExtractorConfig | None = None):
        self.config = config or ExtractorConfig()
        # eager attention so the per-head probabilities are exposed
        self.model = AutoModel.from_pretrained(
            self.config.model_id, attn_implementation="eager"
        )
        self.model.to(self.config.device)
        self.model.eval()

    def _preprocess(self, image: np.ndarray) -> torch.Tensor:
        tensor = torch.from_numpy(image.transpose(2, 0, 1)).unsqueeze(0).float()
        size = self.config.image_size
        if tensor.shape[-2:] != (size, size):
            tensor = F.interpolate(
                tensor, size=(size, size), mode="bilinear", align_corners=False
            )
        mean = torch.tensor(self.config.norm_mean).view(1, 3, 1, 1)
        std = torch.tensor(self.config.norm_std).view(1, 3, 1, 1)
        return ((tensor - mean) / std).to(self.config.device)

    def scores_from_array(self, image: np.ndarray) -> np.ndarray:
        """Mean class-token attention over patch tokens; sums to 1."""
        pixel_values = self._preprocess(image)
        with torch.no_grad():
            out = self.model(pixel_values=pixel_values, output_attentions=True)
        attn = out.attentions[self.config.layer_index][0]  # (heads, T, T)
        n = self.config.n_patches
        n_tokens = attn.shape[-1]
        if n_tokens <= n:
            raise ValueError(
                f"model produced {n_tokens} tokens for {n} patches; "
                "geometry does not match the configured patch grid"
            )
        # patch tokens sit after the class (and any distillation) tokens
        rows = attn[:, 0, n_tokens - n :]
        rows = rows / rows.sum(dim=-1, keepdim=True)
        scores = rows.mean(dim=0).cpu().numpy().astype(np.float64)
        return scores / scores.sum()

    def scores_from_file(self, image_path: str | Path) -> np.ndarray:
        return self.scores_from_array(load_image_unit_scale(image_path))

    def extract_file(self, image_path: str | Path, out_dir: str | Path) -> Path:
        """Write <image-stem>.attn.json in the codec's importance-map schema."""
        scores = self.scores_from_file(image_path)
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        out_path = out_dir / f"{Path(image_path).stem}.attn.json"
        doc = {
            "n_patches": int(scores.size),
            "grid": [self.config.grid, self.config.grid],
            "scores": [float(s) for s in scores],
        }
        out_path.write_text(json.dumps(doc) + "\n", encoding="utf-8")
        return out_path

    def extract_batch(self, image_paths, out_dir: str | Path) -> list[Path]:
        return [self.extract_file(p, out_dir) for p in image_paths]
