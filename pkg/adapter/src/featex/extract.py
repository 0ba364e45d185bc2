"""Build .sfp feature packs from images or 3D point-feature dumps."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .backbones import resolve_backbone
from .errors import ExtractionError, ValidationError
from .sfp import SceneRecord, l2_normalize, write_sfp

MODES = ("class_token", "patch_tokens")

# Cap on views kept per scene in patch mode; evenly strided, deterministic.
DEFAULT_VIEW_CAP = 4096


@dataclass
class SceneImages:
    scene_id: str
    cost: int
    image_paths: list[str]
    sequence_id: str | None = None


@dataclass
class ExtractionRecipe:
    backbone: str
    mode: str  # "class_token" | "patch_tokens"
    scenes: list[SceneImages] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")


def load_image_manifest(path: str | Path) -> list[SceneImages]:
    """Manifest: JSON list of {scene_id, cost, sequence_id, image_paths}.

    Image paths are resolved relative to the manifest file.
    """
    path = Path(path)
    try:
        entries = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON") from exc
    if not isinstance(entries, list):
        raise ValidationError(f"{path}: manifest must be a JSON list")
    scenes = []
    for entry in entries:
        try:
            scenes.append(
                SceneImages(
                    scene_id=entry["scene_id"],
                    cost=int(entry["cost"]),
                    image_paths=[str(path.parent / p) for p in entry["image_paths"]],
                    sequence_id=entry.get("sequence_id"),
                )
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: bad manifest entry {entry!r}") from exc
    return scenes


def _decode_image(path: str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            return np.asarray(rgb, dtype=np.float32) / 255.0
    except (UnidentifiedImageError, OSError) as exc:
        raise ExtractionError(f"cannot decode image {path}: {exc}") from exc


def _stride_subsample(rows: np.ndarray, cap: int) -> np.ndarray:
    n = rows.shape[0]
    if n <= cap:
        return rows
    step = math.ceil(n / cap)
    return rows[::step][:cap]


def extract_pack(
    recipe: ExtractionRecipe,
    out_path: str | Path,
    view_cap: int = DEFAULT_VIEW_CAP,
) -> None:
    """Run the backbone over every scene's images and write an .sfp pack.

    class_token mode yields one view per image; patch_tokens mode yields
    (H/p)*(W/p) views per image (dimensions must divide the patch size),
    capped per scene at ``view_cap`` by even striding. Rows are
    L2-normalized before writing.
    """
    backbone = resolve_backbone(recipe.backbone)
    records: list[SceneRecord] = []
    dim: int | None = None
    for scene in recipe.scenes:
        if not scene.image_paths:
            raise ValidationError(f"scene {scene.scene_id!r}: no images listed")
        images = [_decode_image(p) for p in scene.image_paths]
        if recipe.mode == "class_token":
            feats = backbone.class_tokens(images)
        else:
            chunks = []
            for p, img in zip(scene.image_paths, images):
                h, w, _ = img.shape
                if h % backbone.patch_size or w % backbone.patch_size:
                    raise ValidationError(
                        f"image {p}: size {w}x{h} not divisible by patch size "
                        f"{backbone.patch_size}"
                    )
                chunks.append(backbone.patch_tokens(img))
            widths = {c.shape[1] for c in chunks}
            if len(widths) > 1:
                raise ValidationError(
                    f"scene {scene.scene_id!r}: feature dimensions differ across "
                    f"images: {sorted(widths)}"
                )
            feats = _stride_subsample(np.vstack(chunks), view_cap)
        if dim is None:
            dim = feats.shape[1]
        elif feats.shape[1] != dim:
            raise ValidationError(
                f"scene {scene.scene_id!r}: dimension {feats.shape[1]} != {dim}"
            )
        records.append(
            SceneRecord(
                scene_id=scene.scene_id,
                cost=scene.cost,
                views=l2_normalize(feats, f"scene {scene.scene_id!r}"),
                sequence_id=scene.sequence_id,
            )
        )
    if dim is None:
        raise ValidationError("recipe contains no scenes")
    write_sfp(dim, records, out_path)


def load_feature_manifest(path: str | Path) -> list[dict]:
    """3D manifest: JSON list of {scene_id, cost, features, sequence_id}."""
    path = Path(path)
    try:
        entries = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON") from exc
    if not isinstance(entries, list):
        raise ValidationError(f"{path}: manifest must be a JSON list")
    out = []
    for entry in entries:
        try:
            out.append(
                {
                    "scene_id": entry["scene_id"],
                    "cost": int(entry["cost"]),
                    "features": str(path.parent / entry["features"]),
                    "sequence_id": entry.get("sequence_id"),
                }
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: bad manifest entry {entry!r}") from exc
    return out


def extract_3d_pack(
    source: str | Path,
    out_path: str | Path,
    subsample: int | None = None,
    rng_seed: int = 0,
) -> None:
    """Turn per-scene point-feature dumps (.npy matrices) into an .sfp pack.

    ``source`` is either a directory of ``<scene_id>.npy`` files (cost =
    full point count) or a JSON manifest with explicit costs. With
    ``subsample``, each scene keeps that many rows, drawn without
    replacement under ``rng_seed`` (original row order preserved).
    """
    source = Path(source)
    if source.is_dir():
        entries = [
            {"scene_id": p.stem, "cost": None, "features": str(p), "sequence_id": None}
            for p in sorted(source.glob("*.npy"))
        ]
        if not entries:
            raise ValidationError(f"{source}: no .npy feature dumps found")
    else:
        entries = load_feature_manifest(source)
    rng = np.random.default_rng(rng_seed)
    records: list[SceneRecord] = []
    dim: int | None = None
    for entry in entries:
        mat = np.load(entry["features"])
        if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
            raise ValidationError(
                f"scene {entry['scene_id']!r}: empty or non-matrix feature dump"
            )
        cost = entry["cost"] if entry["cost"] is not None else int(mat.shape[0])
        if subsample is not None and mat.shape[0] > subsample:
            keep = np.sort(rng.choice(mat.shape[0], size=subsample, replace=False))
            mat = mat[keep]
        if dim is None:
            dim = mat.shape[1]
        elif mat.shape[1] != dim:
            raise ValidationError(
                f"scene {entry['scene_id']!r}: dimension {mat.shape[1]} != {dim}"
            )
        records.append(
            SceneRecord(
                scene_id=entry["scene_id"],
                cost=cost,
                views=l2_normalize(mat, f"scene {entry['scene_id']!r}"),
                sequence_id=entry["sequence_id"],
            )
        )
    write_sfp(dim, records, out_path)
