"""Cross-component checks: featex output consumed through the core tooling."""

import subprocess
import sys

import pytest

from featex.cli import main

from conftest import save_png, write_manifest


@pytest.fixture
def image_manifest(tmp_path, rng):
    names = []
    for scene in range(3):
        for i in range(2):
            name = f"s{scene}_{i}.png"
            save_png(tmp_path / name, rng, size=(64, 64))
            names.append(name)
    return write_manifest(
        tmp_path,
        [
            ("room-0", 1200, names[0:2], None),
            ("room-1", 900, names[2:4], None),
            ("room-2", 1500, names[4:6], None),
        ],
    )


def test_cli_extract_then_core_inspect(tmp_path, image_manifest):
    out = tmp_path / "pack.sfp"
    code = main(
        [
            "extract", "--images", str(image_manifest), "--mode", "class",
            "--checkpoint", "proj-d48-p8", "--out", str(out),
        ]
    )
    assert code == 0
    proc = subprocess.run(
        [sys.executable, "-m", "seedsel.cli", "inspect", "--pack", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "scenes: 3" in proc.stdout
    assert "dimension: 48" in proc.stdout
    assert "views=2" in proc.stdout


def test_cli_extract_patch_mode(tmp_path, rng):
    save_png(tmp_path / "one.png", rng, size=(32, 32))
    manifest = write_manifest(tmp_path, [("s", 77, ["one.png"], None)])
    out = tmp_path / "patch.sfp"
    code = main(
        [
            "extract", "--images", str(manifest), "--mode", "patch",
            "--checkpoint", "proj-d16-p8", "--out", str(out),
        ]
    )
    assert code == 0
    import seedsel

    assert seedsel.load_pack(out).scenes[0].view_count == 16


def test_cli_error_exit_code(tmp_path, capsys):
    code = main(
        [
            "extract", "--images", str(tmp_path / "missing.json"), "--mode", "class",
            "--checkpoint", "proj-d16-p8", "--out", str(tmp_path / "x.sfp"),
        ]
    )
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_extracted_pack_runs_full_selection(tmp_path, image_manifest):
    out = tmp_path / "pack.sfp"
    assert main(
        [
            "extract", "--images", str(image_manifest), "--mode", "class",
            "--checkpoint", "proj-d48-p8", "--out", str(out),
        ]
    ) == 0
    import seedsel

    pack = seedsel.load_pack(out)
    graph = seedsel.build_graph(pack, seedsel.KMeansConfig(k=2, rng_seed=0))
    result = seedsel.solve(seedsel.SelectionProblem(graph, budget=2500))
    assert result.total_cost <= 2500
