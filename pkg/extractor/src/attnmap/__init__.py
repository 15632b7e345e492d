"""Importance-map extraction from pretrained ViT attention."""

from .extractor import DEFAULT_MODEL, AttentionExtractor, ExtractorConfig
from .images import load_image_unit_scale

__version__ = "0.1.0"
