"""Command-line pipeline: ingest features, sparsify, build the diversity
graph, reduce, select under a budget, and write reproducible artifacts.

Commands: ``inspect``, ``sparsify``, ``select``, ``baseline``.
Exit codes: 0 success, 1 solver configuration failure, 2 input error.
On failure a machine-readable JSON line ``{"stage", "kind", "message"}``
goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .diversity import KMeansConfig, build_graph, dump_graph
from .errors import PackCorruptionError, PackFormatError, SeedselError, ValidationError
from .packs import FeaturePack, ViewFeatureSet, read_features, scene_means
from .reduce import (
    DEFAULT_SIMILARITY_THRESHOLD,
    FramePool,
    SparsifyConfig,
    restrict_pack,
    sparsify_report,
    top_l_pool,
)
from .select import (
    SelectionProblem,
    objective_of,
    select_greedy_top_pairs,
    select_kmcentroid,
    select_kmfurthest,
    select_random,
    solve,
    total_cost_of,
)

BASELINES = ("random", "kmcentroid", "kmfurthest", "greedy")


class StageError(Exception):
    """Pipeline failure with a stage label and machine-readable kind."""

    def __init__(self, stage: str, kind: str, message: str, exit_code: int = 2):
        super().__init__(message)
        self.stage = stage
        self.kind = kind
        self.exit_code = exit_code


def _kind_of(exc: Exception) -> str:
    if isinstance(exc, FileNotFoundError):
        return "not_found"
    if isinstance(exc, PackFormatError):
        return "bad_format"
    if isinstance(exc, PackCorruptionError):
        return "corrupt"
    if isinstance(exc, ValidationError):
        return "invalid"
    return "error"


def _stage(stage: str, fn, *args, exit_code: int = 2, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (SeedselError, FileNotFoundError, OSError) as exc:
        raise StageError(stage, _kind_of(exc), str(exc), exit_code) from exc


def _canonical_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _load_config_file(path: str | None) -> dict:
    """Flat key=value file; '#' starts a comment; later keys win."""
    if path is None:
        return {}
    values: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_CONFIG_TYPES = {
    "pack": str,
    "budget": int,
    "budget_unit": str,
    "k": int,
    "top_l": int,
    "sparsify": lambda v: v.lower() in ("1", "true", "yes", "on"),
    "sparsify_threshold": float,
    "mode": str,
    "time_limit": float,
    "node_budget": int,
    "gap": float,
    "seed": int,
    "out": str,
    "threads": int,
    "emit_graph": lambda v: v.lower() in ("1", "true", "yes", "on"),
}


def _merge_params(args: argparse.Namespace) -> dict:
    """Config-file values fill in unset flags; explicit flags win."""
    config = _stage("config", _load_config_file, getattr(args, "config", None))
    params: dict = {}
    for key, cast in _CONFIG_TYPES.items():
        flag_value = getattr(args, key, None)
        if flag_value is not None and flag_value is not False:
            params[key] = flag_value
        elif key in config:
            try:
                params[key] = cast(config[key])
            except ValueError as exc:
                raise StageError(
                    "config", "invalid", f"bad value for {key!r}: {config[key]!r}"
                ) from exc
    params.setdefault("budget_unit", "points")
    params.setdefault("top_l", 100)
    params.setdefault("mode", "exact")
    params.setdefault("gap", 0.0)
    params.setdefault("seed", 0)
    params.setdefault("threads", 0)
    params.setdefault("sparsify", False)
    params.setdefault("emit_graph", False)
    if params.get("sparsify_threshold") is not None:
        params["sparsify"] = True
    elif params["sparsify"]:
        params["sparsify_threshold"] = DEFAULT_SIMILARITY_THRESHOLD
    return params


def _require(params: dict, keys: list[str]) -> None:
    missing = [k for k in keys if params.get(k) is None]
    if missing:
        raise StageError(
            "config", "invalid", f"missing required parameter(s): {', '.join(missing)}"
        )


def _prepare_pack(params: dict) -> FeaturePack:
    pack = _stage("load", read_features, params["pack"])
    if params["budget_unit"] == "scenes" and not pack.cost_free:
        # Budget counts scenes: override every cost to one unit.
        pack = FeaturePack(
            dimension=pack.dimension,
            scenes=[
                ViewFeatureSet(s.scene_id, 1, s.views, s.sequence_id)
                for s in pack.scenes
            ],
            cost_free=False,
        )
    return pack


def _run_sparsify(pack: FeaturePack, params: dict, out: Path | None) -> tuple[FeaturePack, dict | None]:
    if not params.get("sparsify"):
        return pack, None
    cfg = SparsifyConfig(similarity_threshold=params["sparsify_threshold"])
    report = _stage("sparsify", sparsify_report, FramePool.from_pack(pack), cfg)
    pack = restrict_pack(pack, report["retained"])
    if out is not None:
        (out / "sparsify.json").write_text(_canonical_json(report))
    return pack, report


def _graph_pipeline(pack: FeaturePack, params: dict, out: Path | None):
    cfg = KMeansConfig(k=params["k"], rng_seed=params["seed"])
    graph = _stage("graph", build_graph, pack, cfg, threads=params["threads"])
    if params["emit_graph"] and out is not None:
        dump_graph(graph, out / "graph.json")
    if len(graph) >= 2:
        reduced = _stage("reduce", top_l_pool, graph, params["top_l"])
    else:
        reduced = graph
    return graph, reduced


def _echo_params(params: dict) -> dict:
    keys = (
        "pack", "budget", "budget_unit", "k", "top_l", "sparsify",
        "sparsify_threshold", "mode", "time_limit", "node_budget", "gap",
        "seed", "threads",
    )
    return {k: params.get(k) for k in keys}


def _write_run_log(out: Path, command: str, params: dict, timings: dict, extra: dict) -> None:
    payload = {
        "command": command,
        "version": __version__,
        "started_at": datetime.now(timezone.utc).isoformat(),
        "params": _echo_params(params),
        "timings_s": timings,
        **extra,
    }
    (out / "run.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_select(args: argparse.Namespace) -> int:
    params = _merge_params(args)
    _require(params, ["pack", "budget", "k", "out"])
    out = Path(params["out"])
    out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}

    t = time.perf_counter()
    pack = _prepare_pack(params)
    pack, _ = _run_sparsify(pack, params, out)
    timings["load_s"] = time.perf_counter() - t

    t = time.perf_counter()
    _, reduced = _graph_pipeline(pack, params, out)
    timings["graph_s"] = time.perf_counter() - t

    t = time.perf_counter()
    problem = _stage(
        "solve",
        SelectionProblem,
        reduced,
        params["budget"],
        mode=params["mode"],
        time_limit_s=params.get("time_limit"),
        node_budget=params.get("node_budget"),
        gap_tolerance=params["gap"],
        exit_code=1,
    )
    result = _stage("solve", solve, problem, exit_code=1)
    timings["solve_s"] = time.perf_counter() - t

    payload = result.to_json()
    solver_time_ms = payload["solver_stats"].pop("time_ms")
    payload["method"] = "select"
    payload["params"] = _echo_params(params)
    (out / "seed.json").write_text(_canonical_json(payload))
    _write_run_log(out, "select", params, timings, {"solver_time_ms": solver_time_ms})
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    params = _merge_params(args)
    _require(params, ["pack", "budget", "k", "out"])
    method = args.method
    out = Path(params["out"])
    out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}

    t = time.perf_counter()
    pack = _prepare_pack(params)
    pack, _ = _run_sparsify(pack, params, out)
    timings["load_s"] = time.perf_counter() - t

    t = time.perf_counter()
    graph, _ = _graph_pipeline(pack, params, out)
    timings["graph_s"] = time.perf_counter() - t

    t = time.perf_counter()
    budget = params["budget"]
    costs = [p.cost for p in graph.nodes]
    means = scene_means(pack)
    if method == "random":
        scenes = [(p.scene_id, p.cost) for p in graph.nodes]
        selected = _stage("solve", select_random, scenes, budget, params["seed"], exit_code=1)
    elif method == "kmcentroid":
        selected = _stage(
            "solve", select_kmcentroid, means, costs, budget, params["k"], params["seed"], exit_code=1
        )
    elif method == "kmfurthest":
        selected = _stage(
            "solve", select_kmfurthest, means, costs, budget, params["k"], params["seed"], exit_code=1
        )
    else:  # greedy
        selected = _stage("solve", select_greedy_top_pairs, graph, budget, exit_code=1)
    timings["solve_s"] = time.perf_counter() - t

    payload = {
        "method": method,
        "selected": list(selected),
        "objective": objective_of(graph, selected),
        "total_cost": total_cost_of(graph, selected),
        "upper_bound": None,
        "gap": None,
        "proof_status": "feasible",
        "solver_stats": None,
        "params": _echo_params(params),
    }
    (out / "seed.json").write_text(_canonical_json(payload))
    _write_run_log(out, f"baseline:{method}", params, timings, {})
    return 0


def cmd_sparsify(args: argparse.Namespace) -> int:
    params = _merge_params(args)
    _require(params, ["pack"])
    pack = _stage("load", read_features, params["pack"])
    threshold = params.get("sparsify_threshold")
    if threshold is None:
        threshold = DEFAULT_SIMILARITY_THRESHOLD
    cfg = SparsifyConfig(similarity_threshold=threshold)
    report = _stage("sparsify", sparsify_report, FramePool.from_pack(pack), cfg)
    text = _canonical_json(report)
    if params.get("out"):
        out = Path(params["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "sparsify.json").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_inspect(args: argparse.Namespace) -> int:
    pack = _stage("load", read_features, args.pack)
    costs = [s.cost for s in pack.scenes]
    print(f"scenes: {len(pack.scenes)}")
    print(f"dimension: {pack.dimension}")
    print(f"cost_free: {pack.cost_free}")
    if costs:
        print(
            "cost: total={} min={} median={} max={}".format(
                sum(costs),
                min(costs),
                sorted(costs)[len(costs) // 2],
                max(costs),
            )
        )
    else:
        print("cost: total=0 min=0 median=0 max=0")
    sequences: dict[str, int] = {}
    for s in pack.scenes:
        if s.sequence_id is not None:
            sequences[s.sequence_id] = sequences.get(s.sequence_id, 0) + 1
    print(f"sequences: {len(sequences)}")
    for seq_id in sorted(sequences):
        print(f"  {seq_id}: {sequences[seq_id]} frames")
    for s in pack.scenes:
        seq = f" seq={s.sequence_id}" if s.sequence_id else ""
        print(f"  scene {s.scene_id}: views={s.view_count} cost={s.cost}{seq}")
    return 0


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pack", help="feature pack (.sfp) or JSON manifest")
    p.add_argument("--config", help="flat key=value config file (flags win)")
    p.add_argument("--budget", type=int, help="annotation budget")
    p.add_argument("--budget-unit", dest="budget_unit", choices=("points", "scenes"))
    p.add_argument("--k", type=int, help="clusters per scene (class count)")
    p.add_argument("--top-l", dest="top_l", type=int, help="edge-pool size (default 100)")
    p.add_argument("--sparsify", action="store_true", default=None,
                   help="drop near-duplicate frames within sequences first")
    p.add_argument("--sparsify-threshold", dest="sparsify_threshold", type=float,
                   help="cosine-similarity threshold (implies --sparsify; default 0.75)")
    p.add_argument("--mode", choices=("exact", "anytime"))
    p.add_argument("--time-limit", dest="time_limit", type=float,
                   help="anytime limit in seconds (translated to a node budget)")
    p.add_argument("--node-budget", dest="node_budget", type=int,
                   help="anytime limit in solver node expansions (overrides --time-limit)")
    p.add_argument("--gap", type=float, help="anytime early-stop gap tolerance")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--out", help="output directory for artifacts")
    p.add_argument("--threads", type=int, help="worker threads, 0 = auto")
    p.add_argument("--emit-graph", dest="emit_graph", action="store_true", default=None,
                   help="also write graph.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seedsel",
        description="Pick a budgeted, diversity-maximal set of scenes to annotate first.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_inspect = sub.add_parser("inspect", help="summarize a feature pack")
    p_inspect.add_argument("--pack", required=True)
    p_inspect.set_defaults(fn=cmd_inspect)

    p_sparsify = sub.add_parser("sparsify", help="report near-duplicate frames")
    _add_common_flags(p_sparsify)
    p_sparsify.set_defaults(fn=cmd_sparsify)

    p_select = sub.add_parser("select", help="run the full selection pipeline")
    _add_common_flags(p_select)
    p_select.set_defaults(fn=cmd_select)

    p_base = sub.add_parser("baseline", help="run a seeding baseline")
    p_base.add_argument("method", choices=BASELINES)
    _add_common_flags(p_base)
    p_base.set_defaults(fn=cmd_baseline)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except StageError as exc:
        print(
            json.dumps({"stage": exc.stage, "kind": exc.kind, "message": str(exc)}),
            file=sys.stderr,
        )
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
