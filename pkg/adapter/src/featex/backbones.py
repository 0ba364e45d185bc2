"""Feature backbones: whole-image (class-token) and per-patch embeddings.

Two checkpoint schemes:

- ``proj-d<dim>-p<patch>``: a deterministic random-projection embedder
  seeded from the name. No weights to download; features are bit-stable
  across runs. Useful for pipelines, tests, and smoke runs.
- ``ts:<path>[@p<patch>]``: a user-exported TorchScript module. Class mode
  calls ``model(batch[B,3,H,W]) -> [B,D]``; patch mode expects
  ``model(batch) -> [B,T,D]`` with one token per patch.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

import numpy as np

from .errors import ExtractionError, ValidationError

_PROJ_RE = re.compile(r"^proj-d(?P<dim>\d+)-p(?P<patch>\d+)$")
_TS_RE = re.compile(r"^ts:(?P<path>.+?)(?:@p(?P<patch>\d+))?$")

_CLASS_GRID = 16  # class-token mode pools the image to a 16x16 grid first


def _seed_from(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class ProjectionBackbone:
    """Seeded Gaussian projection of pixel blocks onto the unit sphere."""

    def __init__(self, name: str, dim: int, patch_size: int):
        self.name = name
        self.dim = dim
        self.patch_size = patch_size
        rng = np.random.default_rng(_seed_from(name))
        n_class = _CLASS_GRID * _CLASS_GRID * 3
        n_patch = patch_size * patch_size * 3
        self._w_class = rng.standard_normal((dim, n_class)) / np.sqrt(n_class)
        self._w_patch = rng.standard_normal((dim, n_patch)) / np.sqrt(n_patch)

    def _pool(self, image: np.ndarray, grid: int) -> np.ndarray:
        h, w, _ = image.shape
        ys = np.linspace(0, h, grid + 1).astype(int)
        xs = np.linspace(0, w, grid + 1).astype(int)
        out = np.empty((grid, grid, 3))
        for a in range(grid):
            for b in range(grid):
                out[a, b] = image[ys[a] : ys[a + 1], xs[b] : xs[b + 1]].mean(axis=(0, 1))
        return out

    def class_tokens(self, images: list[np.ndarray]) -> np.ndarray:
        feats = [
            self._w_class @ (self._pool(img, _CLASS_GRID).ravel() - 0.5)
            for img in images
        ]
        return np.vstack(feats)

    def patch_tokens(self, image: np.ndarray) -> np.ndarray:
        p = self.patch_size
        h, w, _ = image.shape
        blocks = (
            image.reshape(h // p, p, w // p, p, 3)
            .transpose(0, 2, 1, 3, 4)
            .reshape(-1, p * p * 3)
        )
        return (blocks - 0.5) @ self._w_patch.T


class TorchScriptBackbone:
    """Batch inference through a TorchScript checkpoint file."""

    def __init__(self, name: str, path: str, patch_size: int):
        try:
            import torch
        except ImportError as exc:  # pragma: no cover
            raise ExtractionError("torch is required for ts: checkpoints") from exc
        self._torch = torch
        self.name = name
        self.patch_size = patch_size
        checkpoint = Path(path)
        if not checkpoint.exists():
            raise ExtractionError(f"checkpoint not found: {checkpoint}")
        self._model = torch.jit.load(str(checkpoint), map_location="cpu")
        self._model.eval()
        self.dim: int | None = None  # discovered on first forward

    def _batch(self, images: list[np.ndarray]):
        arr = np.stack([img.transpose(2, 0, 1) for img in images]).astype(np.float32)
        return self._torch.from_numpy(arr)

    def _remember_dim(self, dim: int) -> None:
        if self.dim is None:
            self.dim = dim
        elif self.dim != dim:
            raise ValidationError(
                f"checkpoint produced dimension {dim}, expected {self.dim}"
            )

    def class_tokens(self, images: list[np.ndarray]) -> np.ndarray:
        with self._torch.no_grad():
            out = self._model(self._batch(images))
        feats = out.cpu().numpy().astype(np.float64)
        if feats.ndim != 2:
            raise ValidationError(
                f"class-token checkpoint must return [B, D], got shape {tuple(feats.shape)}"
            )
        self._remember_dim(feats.shape[1])
        return feats

    def patch_tokens(self, image: np.ndarray) -> np.ndarray:
        with self._torch.no_grad():
            out = self._model(self._batch([image]))
        feats = out.cpu().numpy().astype(np.float64)
        if feats.ndim != 3:
            raise ValidationError(
                f"patch-token checkpoint must return [B, T, D], got shape {tuple(feats.shape)}"
            )
        h, w, _ = image.shape
        expected = (h // self.patch_size) * (w // self.patch_size)
        if feats.shape[1] != expected:
            raise ValidationError(
                f"checkpoint yielded {feats.shape[1]} tokens, expected {expected} "
                f"for patch size {self.patch_size}"
            )
        self._remember_dim(feats.shape[2])
        return feats[0]


def resolve_backbone(name: str):
    """Instantiate a backbone from its checkpoint identifier."""
    match = _PROJ_RE.match(name)
    if match:
        return ProjectionBackbone(
            name, dim=int(match["dim"]), patch_size=int(match["patch"])
        )
    match = _TS_RE.match(name)
    if match:
        patch = int(match["patch"]) if match["patch"] else 8
        return TorchScriptBackbone(name, match["path"], patch_size=patch)
    raise ValidationError(
        f"unknown backbone {name!r} (expected proj-d<dim>-p<patch> or ts:<path>[@p<patch>])"
    )
