"""Export per-view features from image backbones or 3D feature dumps into
.sfp feature packs."""

__version__ = "0.1.0"

from .backbones import ProjectionBackbone, TorchScriptBackbone, resolve_backbone
from .errors import ExtractionError, ValidationError
from .extract import (
    DEFAULT_VIEW_CAP,
    ExtractionRecipe,
    SceneImages,
    extract_3d_pack,
    extract_pack,
    load_image_manifest,
)
from .sfp import SceneRecord, l2_normalize, write_sfp

__all__ = [
    "DEFAULT_VIEW_CAP",
    "ExtractionError",
    "ExtractionRecipe",
    "ProjectionBackbone",
    "SceneImages",
    "SceneRecord",
    "TorchScriptBackbone",
    "ValidationError",
    "extract_3d_pack",
    "extract_pack",
    "l2_normalize",
    "load_image_manifest",
    "resolve_backbone",
    "write_sfp",
]
