"""Feature-pack storage: the .sfp binary format, a JSON manifest variant,
load-time validation/normalization, and per-scene mean features.

A pack holds, for every scene, an (N_i x D) float32 matrix of view feature
vectors plus an integer annotation cost. All feature rows are L2-normalized
in memory; producers that already normalize pay nothing because rows inside
a tight tolerance band are kept bit-exact (this is what makes
``load_pack(write_pack(p))`` reproduce ``p`` bitwise).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import PackCorruptionError, PackFormatError, ValidationError

MAGIC = b"SFPK"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sHII")  # magic, version, dimension, scene count
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")

# Rows whose norm is farther than this from 1 get rescaled at load. Rows
# already inside the band are kept bit-exact; one normalization pass lands
# well inside the band, so a second load is a no-op.
_RENORM_BAND = 1e-6
_ZERO_NORM = 1e-12

_MAX_COST = 2**64 - 1


@dataclass
class ViewFeatureSet:
    """All view feature vectors of one scene plus its annotation cost."""

    scene_id: str
    cost: int
    views: np.ndarray  # (N, D) float32; rows unit-norm after normalization
    sequence_id: str | None = None

    @property
    def view_count(self) -> int:
        return int(self.views.shape[0])


@dataclass
class FeaturePack:
    """An ordered collection of scenes sharing one feature dimension.

    ``cost_free`` marks packs without per-scene annotation costs (all costs
    zero on disk); selection budgets are then interpreted as scene counts.
    """

    dimension: int
    scenes: list[ViewFeatureSet] = field(default_factory=list)
    cost_free: bool = False

    def scene_ids(self) -> list[str]:
        return [s.scene_id for s in self.scenes]

    def __len__(self) -> int:
        return len(self.scenes)


@dataclass
class SceneMeanFeature:
    """Arithmetic mean of a scene's (normalized) view features."""

    scene_id: str
    mean: np.ndarray  # (D,) float64, norm <= 1 + 1e-6


def normalize_views(views: np.ndarray, scene_id: str = "<scene>") -> np.ndarray:
    """Return *views* as float32 with every row L2-normalized.

    Rows already within ``1e-6`` of unit norm are returned bit-exact.
    Raises ValidationError for rows with norm below ``1e-12``.
    """
    mat = np.ascontiguousarray(views, dtype=np.float32)
    if mat.ndim != 2:
        raise ValidationError(f"scene {scene_id!r}: views must be a 2-D matrix")
    if mat.shape[0] < 1 or mat.shape[1] < 1:
        raise ValidationError(f"scene {scene_id!r}: views must be at least 1x1")
    wide = mat.astype(np.float64)
    norms = np.linalg.norm(wide, axis=1)
    dead = np.flatnonzero(norms < _ZERO_NORM)
    if dead.size:
        raise ValidationError(
            f"scene {scene_id!r}: view row {int(dead[0])} has zero norm"
        )
    off = np.flatnonzero(np.abs(norms - 1.0) > _RENORM_BAND)
    if off.size:
        mat = mat.copy()
        mat[off] = (wide[off] / norms[off, None]).astype(np.float32)
    return mat


def make_pack(
    scenes: list[ViewFeatureSet],
    dimension: int | None = None,
    cost_free: bool = False,
) -> FeaturePack:
    """Assemble a validated pack from in-memory scenes, normalizing rows.

    ``dimension`` is inferred from the first scene when omitted; it is
    required for an empty pack.
    """
    if dimension is None:
        if not scenes:
            raise ValidationError("empty pack needs an explicit dimension")
        dimension = int(np.asarray(scenes[0].views).shape[1])
    normalized = [
        ViewFeatureSet(
            scene_id=s.scene_id,
            cost=s.cost,
            views=normalize_views(s.views, s.scene_id),
            sequence_id=s.sequence_id,
        )
        for s in scenes
    ]
    pack = FeaturePack(dimension=dimension, scenes=normalized, cost_free=cost_free)
    validate_pack(pack)
    return pack


def validate_pack(pack: FeaturePack) -> None:
    """Raise ValidationError unless *pack* satisfies every pack invariant."""
    if pack.dimension < 1:
        raise ValidationError("dimension must be >= 1")
    seen: set[str] = set()
    for scene in pack.scenes:
        sid = scene.scene_id
        if not sid:
            raise ValidationError("scene id must be a non-empty string")
        if sid in seen:
            raise ValidationError(f"duplicate scene id {sid!r}")
        seen.add(sid)
        if len(sid.encode("utf-8")) > 0xFFFF:
            raise ValidationError(f"scene id {sid!r} exceeds 65535 UTF-8 bytes")
        if scene.sequence_id is not None and len(scene.sequence_id.encode("utf-8")) > 0xFFFF:
            raise ValidationError(f"scene {sid!r}: sequence id too long")
        if not isinstance(scene.cost, (int, np.integer)) or not 0 <= scene.cost <= _MAX_COST:
            raise ValidationError(f"scene {sid!r}: cost must be an integer in [0, 2^64)")
        if scene.cost == 0 and not pack.cost_free:
            raise ValidationError(f"scene {sid!r}: zero cost requires a cost-free pack")
        if scene.cost != 0 and pack.cost_free:
            raise ValidationError(f"scene {sid!r}: cost-free pack must carry zero costs")
        mat = scene.views
        if mat.dtype != np.float32 or mat.ndim != 2:
            raise ValidationError(f"scene {sid!r}: views must be a float32 matrix")
        if mat.shape[0] < 1:
            raise ValidationError(f"scene {sid!r}: needs at least one view")
        if mat.shape[1] != pack.dimension:
            raise ValidationError(
                f"scene {sid!r}: views have dimension {mat.shape[1]}, pack says {pack.dimension}"
            )
        norms = np.linalg.norm(mat.astype(np.float64), axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-5):
            raise ValidationError(f"scene {sid!r}: view rows are not unit-norm")


def write_pack(pack: FeaturePack, path: str | Path) -> None:
    """Serialize *pack* to the binary .sfp format.

    The pack must satisfy all invariants (call :func:`make_pack` or
    :func:`normalize_views` first for raw features).
    """
    validate_pack(pack)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, pack.dimension, len(pack.scenes)))
        for scene in pack.scenes:
            sid = scene.scene_id.encode("utf-8")
            seq = (scene.sequence_id or "").encode("utf-8")
            fh.write(_U16.pack(len(sid)))
            fh.write(sid)
            fh.write(_U16.pack(len(seq)))
            fh.write(seq)
            fh.write(_U64.pack(scene.cost))
            fh.write(_U32.pack(scene.views.shape[0]))
            fh.write(np.ascontiguousarray(scene.views, dtype="<f4").tobytes())


class _Reader:
    """Bounds-checked cursor over a byte buffer."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        end = self.pos + n
        if end > len(self.data):
            raise PackCorruptionError(
                f"truncated pack: wanted {n} bytes at offset {self.pos}"
            )
        chunk = self.data[self.pos : end]
        self.pos = end
        return chunk

    def u16(self) -> int:
        return _U16.unpack(self.take(2))[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def text(self, n: int, what: str) -> str:
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PackCorruptionError(f"{what} is not valid UTF-8") from exc


def load_pack(path: str | Path) -> FeaturePack:
    """Load and validate a binary .sfp pack; feature rows come back normalized."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size or data[:4] != MAGIC:
        raise PackFormatError(f"{path}: not a feature pack (bad magic)")
    magic, version, dim, count = _HEADER.unpack(data[: _HEADER.size])
    if version != FORMAT_VERSION:
        raise PackFormatError(f"{path}: unsupported format version {version}")
    if dim < 1:
        raise PackCorruptionError(f"{path}: header dimension {dim} is invalid")
    rd = _Reader(data)
    rd.pos = _HEADER.size
    scenes = []
    for _ in range(count):
        sid = rd.text(rd.u16(), "scene id")
        seq = rd.text(rd.u16(), "sequence id") or None
        cost = rd.u64()
        n_views = rd.u32()
        if n_views < 1:
            raise ValidationError(f"scene {sid!r}: view count must be >= 1")
        raw = rd.take(n_views * dim * 4)
        mat = np.frombuffer(raw, dtype="<f4").reshape(n_views, dim)
        scenes.append(
            ViewFeatureSet(
                scene_id=sid,
                cost=cost,
                views=normalize_views(mat, sid),
                sequence_id=seq,
            )
        )
    if rd.pos != len(data):
        raise PackCorruptionError(
            f"{path}: {len(data) - rd.pos} trailing bytes after last scene "
            "(header dimension or counts disagree with payload)"
        )
    pack = FeaturePack(dimension=dim, scenes=scenes, cost_free=_infer_cost_free(scenes))
    validate_pack(pack)
    return pack


def _infer_cost_free(scenes: list[ViewFeatureSet]) -> bool:
    # cost-free is not stored on disk: a pack is cost-free iff every cost is
    # zero (mixed zero/nonzero costs fail validation afterwards).
    return bool(scenes) and all(s.cost == 0 for s in scenes)


def load_manifest(path: str | Path) -> FeaturePack:
    """Load a pack described by a JSON manifest with one CSV of floats per scene.

    Manifest schema::

        {"dimension": D,
         "scenes": [{"id": ..., "cost": ..., "sequence_id": ..., "views_csv": path}]}

    CSV paths are resolved relative to the manifest file. Loader behavior
    (normalization, validation, errors) matches :func:`load_pack`.
    """
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise PackFormatError(f"{path}: not valid JSON") from exc
    if not isinstance(manifest, dict) or "dimension" not in manifest or "scenes" not in manifest:
        raise PackFormatError(f"{path}: manifest needs 'dimension' and 'scenes'")
    dim = int(manifest["dimension"])
    if dim < 1:
        raise PackCorruptionError(f"{path}: dimension {dim} is invalid")
    scenes = []
    for entry in manifest["scenes"]:
        sid = entry.get("id")
        if not isinstance(sid, str):
            raise PackFormatError(f"{path}: scene entry missing string 'id'")
        if "views_csv" not in entry:
            raise PackFormatError(f"{path}: scene {sid!r} missing 'views_csv'")
        csv_path = path.parent / entry["views_csv"]
        mat = np.loadtxt(csv_path, delimiter=",", dtype=np.float64, ndmin=2)
        if mat.shape[1] != dim:
            raise PackCorruptionError(
                f"scene {sid!r}: CSV has {mat.shape[1]} columns, manifest says {dim}"
            )
        scenes.append(
            ViewFeatureSet(
                scene_id=sid,
                cost=int(entry.get("cost", 0)),
                views=normalize_views(mat, sid),
                sequence_id=entry.get("sequence_id"),
            )
        )
    pack = FeaturePack(dimension=dim, scenes=scenes, cost_free=_infer_cost_free(scenes))
    validate_pack(pack)
    return pack


def read_features(path: str | Path) -> FeaturePack:
    """Load either format: .sfp by magic bytes, otherwise the JSON manifest."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return load_pack(path)
    return load_manifest(path)


def scene_means(pack: FeaturePack) -> list[SceneMeanFeature]:
    """Per-scene arithmetic mean of the normalized view features, in pack order."""
    out = []
    for scene in pack.scenes:
        mean = scene.views.astype(np.float64).mean(axis=0)
        out.append(SceneMeanFeature(scene_id=scene.scene_id, mean=mean))
    return out
