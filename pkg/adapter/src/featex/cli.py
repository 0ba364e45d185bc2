"""CLI: export image or point features into .sfp feature packs."""

from __future__ import annotations

import argparse
import sys

from .errors import ExtractionError, ValidationError
from .extract import (
    DEFAULT_VIEW_CAP,
    ExtractionRecipe,
    extract_3d_pack,
    extract_pack,
    load_image_manifest,
)

_MODE_ALIASES = {"class": "class_token", "patch": "patch_tokens"}


def cmd_extract(args: argparse.Namespace) -> int:
    recipe = ExtractionRecipe(
        backbone=args.checkpoint,
        mode=_MODE_ALIASES[args.mode],
        scenes=load_image_manifest(args.images),
    )
    extract_pack(recipe, args.out, view_cap=args.view_cap)
    print(f"wrote {args.out}")
    return 0


def cmd_extract_3d(args: argparse.Namespace) -> int:
    extract_3d_pack(
        args.features, args.out, subsample=args.subsample, rng_seed=args.seed
    )
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featex", description="Export view features into .sfp packs."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ex = sub.add_parser("extract", help="embed scene images")
    p_ex.add_argument("--images", required=True,
                      help="JSON manifest: [{scene_id, cost, sequence_id, image_paths}]")
    p_ex.add_argument("--mode", choices=tuple(_MODE_ALIASES), required=True,
                      help="class: one feature per image; patch: one per image patch")
    p_ex.add_argument("--checkpoint", required=True,
                      help="backbone id: proj-d<dim>-p<patch> or ts:<path>[@p<patch>]")
    p_ex.add_argument("--out", required=True, help="output .sfp path")
    p_ex.add_argument("--view-cap", dest="view_cap", type=int, default=DEFAULT_VIEW_CAP,
                      help="max views kept per scene in patch mode")
    p_ex.set_defaults(fn=cmd_extract)

    p_3d = sub.add_parser("extract-3d", help="package 3D point-feature dumps")
    p_3d.add_argument("--features", required=True,
                      help="directory of <scene>.npy dumps or a JSON manifest")
    p_3d.add_argument("--out", required=True)
    p_3d.add_argument("--subsample", type=int, default=None,
                      help="keep this many rows per scene")
    p_3d.add_argument("--seed", type=int, default=0)
    p_3d.set_defaults(fn=cmd_extract_3d)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ExtractionError, ValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
