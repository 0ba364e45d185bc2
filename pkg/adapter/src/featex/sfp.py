"""Writer for the .sfp feature-pack interchange format.

Layout: magic "SFPK", version u16=1, dimension u32, scene count u32; per
scene: id (u16 length + UTF-8), sequence id (u16 length + UTF-8, 0 = none),
cost u64, view count u32, then N*D little-endian f32 row-major. All
integers little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

MAGIC = b"SFPK"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHII")
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


@dataclass
class SceneRecord:
    scene_id: str
    cost: int
    views: np.ndarray  # (N, D) float32, rows unit-norm
    sequence_id: str | None = None


def l2_normalize(rows: np.ndarray, label: str) -> np.ndarray:
    """Unit-normalize rows in float64, return float32; zero rows are errors."""
    mat = np.asarray(rows, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise ValidationError(f"{label}: expected a non-empty 2-D feature matrix")
    norms = np.linalg.norm(mat, axis=1)
    dead = np.flatnonzero(norms < 1e-12)
    if dead.size:
        raise ValidationError(f"{label}: feature row {int(dead[0])} has zero norm")
    return (mat / norms[:, None]).astype(np.float32)


def write_sfp(dimension: int, scenes: list[SceneRecord], path: str | Path) -> None:
    if dimension < 1:
        raise ValidationError("dimension must be >= 1")
    seen: set[str] = set()
    for rec in scenes:
        if not rec.scene_id or rec.scene_id in seen:
            raise ValidationError(f"scene id {rec.scene_id!r} empty or duplicate")
        seen.add(rec.scene_id)
        if rec.cost < 0:
            raise ValidationError(f"scene {rec.scene_id!r}: negative cost")
        if rec.views.shape[1] != dimension:
            raise ValidationError(
                f"scene {rec.scene_id!r}: feature dimension {rec.views.shape[1]} != {dimension}"
            )
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dimension, len(scenes)))
        for rec in scenes:
            sid = rec.scene_id.encode("utf-8")
            seq = (rec.sequence_id or "").encode("utf-8")
            fh.write(_U16.pack(len(sid)))
            fh.write(sid)
            fh.write(_U16.pack(len(seq)))
            fh.write(seq)
            fh.write(_U64.pack(rec.cost))
            fh.write(_U32.pack(rec.views.shape[0]))
            fh.write(np.ascontiguousarray(rec.views, dtype="<f4").tobytes())
