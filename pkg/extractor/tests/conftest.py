import numpy as np
import pytest
import torch
from transformers import DeiTConfig, DeiTModel, ViTConfig, ViTModel


def _tiny_kwargs():
    return dict(
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=4,
        intermediate_size=64,
        image_size=224,
        patch_size=16,
        attn_implementation="eager",
    )


@pytest.fixture(scope="session")
def vit_checkpoint(tmp_path_factory):
    """Local seeded ViT checkpoint (cls token + 196 patch tokens)."""
    torch.manual_seed(1234)
    model = ViTModel(ViTConfig(**_tiny_kwargs()))
    path = tmp_path_factory.mktemp("vit")
    model.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def deit_checkpoint(tmp_path_factory):
    """Local seeded distilled-style checkpoint (cls + distillation + patches)."""
    torch.manual_seed(1234)
    model = DeiTModel(DeiTConfig(**_tiny_kwargs()))
    path = tmp_path_factory.mktemp("deit")
    model.save_pretrained(path)
    return str(path)


def write_pgm(path, pixels: np.ndarray) -> None:
    h, w = pixels.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    path.write_bytes(header + pixels.astype(np.uint8).tobytes())


def write_ppm(path, pixels: np.ndarray) -> None:
    h, w, _ = pixels.shape
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    path.write_bytes(header + pixels.astype(np.uint8).tobytes())


@pytest.fixture(scope="session")
def sample_images(tmp_path_factory):
    """Ten sample images of mixed formats and sizes."""
    rng = np.random.default_rng(77)
    folder = tmp_path_factory.mktemp("images")
    paths = []
    for i in range(10):
        if i % 2 == 0:
            path = folder / f"sample{i:02d}.pgm"
            write_pgm(path, rng.integers(0, 256, (64, 64)))
        else:
            path = folder / f"sample{i:02d}.ppm"
            write_ppm(path, rng.integers(0, 256, (224, 224, 3)))
        paths.append(path)
    return paths
