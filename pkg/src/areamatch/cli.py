"""Command-line entry point: ``areamatch {segment,match,eval,bench,sweep,synth}``.

Exit codes: 0 success, 2 input error, 3 match failure, 4 configuration error.
Flag defaults can be overridden by a JSON object in the file named by
``$AREAMATCH_CONFIG`` (keys are the long flag names with underscores).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import AreaMatchError, ConfigError, FormatError, IoError, MatchFailed
from .evaluation import (
    DEFAULT_REPEATS,
    DEFAULT_TOL_DEG,
    BenchCase,
    SyntheticSpec,
    bench,
    bench_to_csv,
    bench_to_text,
    evaluate,
    generate_synthetic_pair,
    random_rigid,
    repeated_match,
    summarize,
)
from .geometry import Point2, RigidTransform2D
from .map_io import (
    DEFAULT_FREE_THRESHOLD,
    DEFAULT_OCCUPIED_THRESHOLD,
    GridMap,
    load_grid_map,
    read_area_graph,
    render_alignment,
    save_grid_map,
    write_area_graph,
)
from .matching import WeightVector, simplex_lattice, sweep_to_csv, weight_sweep
from .segmentation import AreaGraph, segment_grid_map
from .transform_estimation import SCORE_SCOPES, MatchConfig, match_maps

log = logging.getLogger("areamatch")

EXIT_OK, EXIT_INPUT, EXIT_MATCH, EXIT_CONFIG = 0, 2, 3, 4
CONFIG_ENV = "AREAMATCH_CONFIG"
AREA_GRAPH_SUFFIXES = {".areagraph", ".json"}


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _add_map_flags(p: argparse.ArgumentParser, two_maps: bool) -> None:
    p.add_argument("--resolution", type=float, help="metres per cell for every grid-map input")
    if two_maps:
        p.add_argument("--resolution-a", type=float, help="metres per cell of map A (overrides --resolution)")
        p.add_argument("--resolution-b", type=float, help="metres per cell of map B (overrides --resolution)")
    p.add_argument("--free-threshold", type=int, default=DEFAULT_FREE_THRESHOLD,
                   help="pixels >= this are free (default %(default)s)")
    p.add_argument("--occupied-threshold", type=int, default=DEFAULT_OCCUPIED_THRESHOLD,
                   help="pixels <= this are occupied (default %(default)s)")
    p.add_argument("--width", type=float, default=1.8, help="segmentation width parameter in metres (default %(default)s)")


def _add_match_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=3, help="mutual k-nearest neighbours (default %(default)s)")
    p.add_argument("--weights", default="0.1,0.1,0.8", help="w_a,w_p,w_l summing to 1 (default %(default)s)")
    p.add_argument("--angle-threshold-deg", type=float, default=3.0,
                   help="rotation clustering radius in degrees (default %(default)s)")
    p.add_argument("--overlap-threshold", type=float, default=0.7,
                   help="minimum overlap percentage to accept a pair hypothesis (default %(default)s)")
    p.add_argument("--score-scope", choices=SCORE_SCOPES, default="all",
                   help="pairs summed when scoring samples: every mutual pair or best-cluster pairs only")
    p.add_argument("--seed", type=int, default=None, help="permute the hypothesis order reproducibly")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="areamatch", description="Align two 2D maps by matching segmented areas.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for sweep (default %(default)s)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment a grid map into an area-graph file")
    p.add_argument("map")
    _add_map_flags(p, two_maps=False)
    p.add_argument("-o", "--output", required=True, help="area-graph output path")

    p = sub.add_parser("match", help="estimate the transform taking map A onto map B")
    p.add_argument("map_a")
    p.add_argument("map_b")
    _add_map_flags(p, two_maps=True)
    _add_match_flags(p)
    p.add_argument("--render", help="write an alignment overlay PNG (grid-map inputs only)")
    p.add_argument("--timings", action="store_true", help="include phase timings in the output")
    p.add_argument("-o", "--output", help="also write the result JSON here")

    p = sub.add_parser("eval", help="score a match against a ground-truth transform")
    p.add_argument("map_a", nargs="?")
    p.add_argument("map_b", nargs="?")
    p.add_argument("--gt", required=True, help="ground-truth transform JSON ({theta_rad, t})")
    p.add_argument("--result", help="evaluate this saved match result instead of running the matcher")
    p.add_argument("--repeats", type=int, default=DEFAULT_REPEATS, help="seeded repeats (default %(default)s)")
    p.add_argument("--tol-deg", type=float, default=DEFAULT_TOL_DEG)
    p.add_argument("--tol-m", type=float, default=None, help="translation tolerance (default: 2 cells of map B)")
    _add_map_flags(p, two_maps=True)
    _add_match_flags(p)
    p.add_argument("--timings", action="store_true")

    p = sub.add_parser("bench", help="per-phase timings and correctness over seeded repeats")
    p.add_argument("--case", nargs=3, action="append", metavar=("MAP_A", "MAP_B", "GT"), default=[],
                   help="a map pair with its ground truth; repeatable")
    p.add_argument("--synthetic", type=int, default=0, help="add this many generated floorplan pairs")
    p.add_argument("--synthetic-resolution", type=float, default=0.05)
    p.add_argument("--repeats", type=int, default=DEFAULT_REPEATS, help="repeats per pair (default %(default)s)")
    p.add_argument("--tol-deg", type=float, default=DEFAULT_TOL_DEG)
    p.add_argument("--tol-m", type=float, default=None)
    p.add_argument("--csv", help="also write the table as CSV")
    _add_map_flags(p, two_maps=True)
    _add_match_flags(p)

    p = sub.add_parser("sweep", help="correctness over the weight simplex")
    p.add_argument("map_a")
    p.add_argument("map_b")
    p.add_argument("--gt-pairs", required=True,
                   help="JSON list of [area_id_a, area_id_b] pairs, or 'identity' for a map against itself")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("-o", "--output", help="CSV output path (default: standard output)")
    _add_map_flags(p, two_maps=True)
    _add_match_flags(p)

    p = sub.add_parser("synth", help="generate a synthetic floorplan pair with a known transform")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rooms", default="2x6", help="room grid ROWSxCOLS (default %(default)s)")
    p.add_argument("--resolution", type=_positive, default=0.05)
    p.add_argument("--theta-deg", type=float, default=None, help="rotation of map A (default: random)")
    p.add_argument("--tx", type=float, default=None)
    p.add_argument("--ty", type=float, default=None)
    p.add_argument("--max-translation", type=float, default=5.0)
    p.add_argument("--dropout", type=float, default=0.02)
    p.add_argument("--speckle", type=float, default=0.0)
    p.add_argument("--format", choices=("pgm", "png"), default="pgm")

    _apply_env_defaults(parser)
    return parser


def _apply_env_defaults(parser: argparse.ArgumentParser) -> None:
    path = os.environ.get(CONFIG_ENV)
    if not path:
        return
    try:
        defaults = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {CONFIG_ENV}={path}: {exc}") from exc
    if not isinstance(defaults, dict):
        raise ConfigError(f"{CONFIG_ENV} must name a JSON object")
    parser.set_defaults(**defaults)
    for action in parser._subparsers._group_actions:  # type: ignore[union-attr]
        for sp in action.choices.values():
            sp.set_defaults(**defaults)


def match_config(args: argparse.Namespace) -> MatchConfig:
    return MatchConfig(
        width=args.width,
        k=args.k,
        weights=WeightVector.parse(args.weights),
        angle_threshold_deg=args.angle_threshold_deg,
        overlap_threshold=args.overlap_threshold,
        seed=args.seed,
        score_scope=args.score_scope,
    )


def _resolution(args: argparse.Namespace, which: str | None) -> float | None:
    own = getattr(args, f"resolution_{which}", None) if which else None
    return own if own is not None else args.resolution


def load_map(path: str, args: argparse.Namespace, which: str | None = None) -> GridMap | AreaGraph:
    if Path(path).suffix.lower() in AREA_GRAPH_SUFFIXES:
        return read_area_graph(path)
    res = _resolution(args, which)
    if res is None:
        raise ConfigError(f"grid map {path} needs a resolution (--resolution)")
    return load_grid_map(path, res, args.free_threshold, args.occupied_threshold)


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _emit(text: str, output: str | None) -> None:
    sys.stdout.write(text)
    if output:
        Path(output).write_text(text, encoding="utf-8")


def _read_transform_doc(path: str) -> tuple[RigidTransform2D, dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return RigidTransform2D.from_dict(doc), doc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: expected {{theta_rad, t: [x, y]}}: {exc}") from exc


def _read_transform(path: str) -> RigidTransform2D:
    return _read_transform_doc(path)[0]


def _centroid(m: GridMap | AreaGraph) -> Point2:
    if isinstance(m, GridMap):
        return m.free_centroid()
    pts = np.concatenate([a.polygon.vertices for a in m.areas])
    return Point2(*map(float, pts.mean(axis=0)))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_segment(args: argparse.Namespace) -> int:
    grid = load_map_grid(args.map, args)
    graph = segment_grid_map(grid, args.width, source=Path(args.map).name)
    write_area_graph(graph, args.output)
    log.info("wrote %d areas to %s", len(graph), args.output)
    return EXIT_OK


def load_map_grid(path: str, args: argparse.Namespace) -> GridMap:
    if args.resolution is None:
        raise ConfigError(f"grid map {path} needs a resolution (--resolution)")
    return load_grid_map(path, args.resolution, args.free_threshold, args.occupied_threshold)


def cmd_match(args: argparse.Namespace) -> int:
    config = match_config(args)
    map_a = load_map(args.map_a, args, "a")
    map_b = load_map(args.map_b, args, "b")
    result = match_maps(map_a, map_b, config)
    _emit(_dump(result.to_dict(include_timings=args.timings)), args.output)
    if args.render:
        if not (isinstance(map_a, GridMap) and isinstance(map_b, GridMap)):
            raise ConfigError("--render needs grid-map inputs")
        render_alignment(map_a, map_b, result.transform, args.render)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    gt, gt_doc = _read_transform_doc(args.gt)
    if args.result:
        est = _read_transform(args.result)
        tol = args.tol_m
        if tol is None:
            res = args.resolution_b or args.resolution or gt_doc.get("resolution")
            if res is None:
                raise ConfigError("eval --result needs --tol-m, --resolution or a resolution field in the gt file")
            tol = 2 * float(res)
        report = evaluate(est, gt, args.tol_deg, tol)
    else:
        if not (args.map_a and args.map_b):
            raise ConfigError("eval needs MAP_A MAP_B or --result")
        config = match_config(args)
        map_a = load_map(args.map_a, args, "a")
        map_b = load_map(args.map_b, args, "b")
        res_b = map_b.resolution
        tol = args.tol_m if args.tol_m is not None else 2 * res_b
        center = _centroid(map_a)
        # segment once; repeats only vary the hypothesis order
        if isinstance(map_a, GridMap):
            map_a = segment_grid_map(map_a, config.width)
        if isinstance(map_b, GridMap):
            map_b = segment_grid_map(map_b, config.width)
        reports = repeated_match(map_a, map_b, gt, config, args.repeats, args.tol_deg, tol, center)
        report = summarize(reports)
    sys.stdout.write(_dump(report.to_dict(include_timings=args.timings)))
    return EXIT_OK


def _synthetic_cases(n: int, seed: int, resolution: float) -> list[BenchCase]:
    cases = []
    for i in range(n):
        rng = np.random.default_rng(seed + i)
        spec = SyntheticSpec(gt_transform=random_rigid(rng), dropout=0.02, seed=seed + i, resolution=resolution)
        a, b, gt = generate_synthetic_pair(spec)
        cases.append(BenchCase(f"synth{seed + i}", a, b, gt))
    return cases


def cmd_bench(args: argparse.Namespace) -> int:
    config = match_config(args)
    cases = []
    for a, b, g in args.case:
        map_a, map_b = load_map(a, args, "a"), load_map(b, args, "b")
        if not (isinstance(map_a, GridMap) and isinstance(map_b, GridMap)):
            raise ConfigError("bench cases must be grid maps")
        cases.append(BenchCase(Path(a).stem, map_a, map_b, _read_transform(g)))
    if args.synthetic:
        cases += _synthetic_cases(args.synthetic, args.seed or 0, args.synthetic_resolution)
    if not cases:
        raise ConfigError("bench needs --case or --synthetic")
    rows = bench(cases, args.repeats, replace(config, seed=args.seed), args.tol_deg, args.tol_m)
    sys.stdout.write(bench_to_text(rows))
    if args.csv:
        Path(args.csv).write_text(bench_to_csv(rows), encoding="utf-8")
    return EXIT_OK


def _sweep_chunk(payload):
    graph_a, graph_b, gt, config, lattice = payload
    return weight_sweep(graph_a, graph_b, gt, config=config, lattice=lattice)


def cmd_sweep(args: argparse.Namespace) -> int:
    config = match_config(args)
    graphs = []
    for path, which in ((args.map_a, "a"), (args.map_b, "b")):
        m = load_map(path, args, which)
        graphs.append(m if isinstance(m, AreaGraph) else segment_grid_map(m, config.width))
    graph_a, graph_b = graphs
    if args.gt_pairs == "identity":
        gt = [(i, i) for i in graph_a.ids if i in set(graph_b.ids)]
    else:
        try:
            gt = [tuple(map(int, p)) for p in json.loads(Path(args.gt_pairs).read_text(encoding="utf-8"))]
        except OSError as exc:
            raise IoError(f"cannot read {args.gt_pairs}: {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise FormatError(f"{args.gt_pairs}: expected a JSON list of [id_a, id_b] pairs") from exc
    lattice = simplex_lattice(args.step)
    jobs = max(1, args.jobs)
    if jobs == 1:
        points = weight_sweep(graph_a, graph_b, gt, config=config, lattice=lattice)
    else:
        chunks = [lattice[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(jobs) as pool:
            parts = list(pool.map(_sweep_chunk, [(graph_a, graph_b, gt, config, c) for c in chunks]))
        points = [None] * len(lattice)
        for i, part in enumerate(parts):
            points[i::jobs] = part
    text = sweep_to_csv(points)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        rows, cols = (int(v) for v in args.rooms.lower().split("x"))
    except ValueError as exc:
        raise ConfigError(f"--rooms must look like 2x6, got {args.rooms!r}") from exc
    rng = np.random.default_rng(args.seed)
    gt = random_rigid(rng, args.max_translation)
    gt = RigidTransform2D(
        math.radians(args.theta_deg) if args.theta_deg is not None else gt.theta,
        args.tx if args.tx is not None else gt.tx,
        args.ty if args.ty is not None else gt.ty,
    )
    spec = SyntheticSpec(room_grid=(rows, cols), resolution=args.resolution, gt_transform=gt,
                         dropout=args.dropout, speckle=args.speckle, seed=args.seed)
    map_a, map_b, gt = generate_synthetic_pair(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_grid_map(map_a, out / f"a.{args.format}")
    save_grid_map(map_b, out / f"b.{args.format}")
    # image files carry no origin, so express the transform between image-anchored frames
    shift_a = RigidTransform2D(0.0, map_a.origin.x, map_a.origin.y)
    unshift_b = RigidTransform2D(0.0, -map_b.origin.x, -map_b.origin.y)
    local_gt = unshift_b.compose(gt.compose(shift_a))
    doc = local_gt.to_dict() | {"theta_deg": math.degrees(local_gt.theta), "resolution": args.resolution}
    (out / "gt.json").write_text(_dump(doc), encoding="utf-8")
    sys.stdout.write(_dump({"a": str(out / f"a.{args.format}"), "b": str(out / f"b.{args.format}"),
                            "gt": str(out / "gt.json"), "resolution": args.resolution}))
    return EXIT_OK


COMMANDS = {
    "segment": cmd_segment,
    "match": cmd_match,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        parser = build_parser()
    except ConfigError as exc:
        print(f"areamatch: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except MatchFailed as exc:
        print(f"areamatch: match failed: {exc}", file=sys.stderr)
        return EXIT_MATCH
    except ConfigError as exc:
        print(f"areamatch: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AreaMatchError as exc:
        print(f"areamatch: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
