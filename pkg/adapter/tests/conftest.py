import json

import numpy as np
import pytest
from PIL import Image


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def save_png(path, rng, size=(64, 64)):
    pixels = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
    Image.fromarray(pixels, "RGB").save(path)
    return path


def write_manifest(tmp_path, scenes):
    """scenes: list of (scene_id, cost, [image names], sequence_id)."""
    entries = [
        {
            "scene_id": sid,
            "cost": cost,
            "image_paths": names,
            "sequence_id": seq,
        }
        for sid, cost, names, seq in scenes
    ]
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(entries))
    return path
