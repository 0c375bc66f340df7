"""Synthetic floorplan pairs with known transforms, error metrics and timing tables."""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError, MatchFailed
from .geometry import Point2, RigidTransform2D, circular_distance
from .map_io import Cell, GridMap
from .transform_estimation import MatchConfig, MatchResult, match_maps

DEFAULT_TOL_DEG = 3.0
DEFAULT_REPEATS = 20


@dataclass(frozen=True)
class SyntheticSpec:
    """Corridor-and-rooms floorplan.

    ``room_grid = (rows, cols)``: rows of rooms stacked in bands of two around a
    horizontal corridor (one row below, one above); with more than one band a
    vertical corridor on the left joins them. Noise is applied to map A only:
    ``dropout`` turns that fraction of occupied cells free, ``speckle`` turns
    that fraction of free cells occupied.
    """

    room_grid: tuple[int, int] = (2, 6)
    corridor_width: float = 2.4
    door_width: float = 1.0
    wall_thickness: float = 0.3
    room_width_range: tuple[float, float] = (4.0, 7.5)
    room_depth_range: tuple[float, float] = (4.0, 6.5)
    internal_door_prob: float = 0.35
    resolution: float = 0.05
    margin: float = 1.0
    gt_transform: RigidTransform2D = field(default_factory=RigidTransform2D.identity)
    dropout: float = 0.0
    speckle: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        rows, cols = self.room_grid
        if rows < 1 or cols < 1 or rows * cols < 2:
            raise ConfigError(f"need at least 2 rooms, got grid {self.room_grid}")
        for name in ("corridor_width", "door_width", "wall_thickness", "resolution"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("dropout", "speckle", "internal_door_prob"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"{name} must lie in [0, 1)")
        lo, hi = self.room_width_range
        if not 0 < lo <= hi or lo < self.door_width + 0.6:
            raise ConfigError("room widths must exceed the door width plus clearance")
        lo, hi = self.room_depth_range
        if not 0 < lo <= hi or lo < self.door_width + 0.6:
            raise ConfigError("room depths must exceed the door width plus clearance")


@dataclass(frozen=True)
class Floorplan:
    """Axis-aligned free-space rectangles ``(x0, y0, x1, y1)`` inside a building box."""

    free_rects: tuple[tuple[float, float, float, float], ...]
    rooms: tuple[tuple[float, float, float, float], ...]
    extent: tuple[float, float]
    n_corridors: int = 1

    def classify(self, points: np.ndarray) -> np.ndarray:
        """Cell state at each point: free inside a rectangle, occupied inside the building, else unknown."""
        x, y = points[..., 0], points[..., 1]
        out = np.full(x.shape, Cell.UNKNOWN, dtype=np.uint8)
        w, h = self.extent
        out[(x >= 0) & (x <= w) & (y >= 0) & (y <= h)] = Cell.OCCUPIED
        for x0, y0, x1, y1 in self.free_rects:
            out[(x > x0) & (x < x1) & (y > y0) & (y < y1)] = Cell.FREE
        return out


def build_floorplan(spec: SyntheticSpec, rng: np.random.Generator) -> Floorplan:
    rows, cols = spec.room_grid
    tw, cw, dw = spec.wall_thickness, spec.corridor_width, spec.door_width
    bands = math.ceil(rows / 2)
    x_start = tw + (cw + tw if bands > 1 else 0.0)

    widths = rng.uniform(*spec.room_width_range, size=cols)
    length = float(widths.sum() + tw * (cols - 1))
    x_end = x_start + length

    free: list[tuple[float, float, float, float]] = []
    rooms: list[tuple[float, float, float, float]] = []
    corridors: list[tuple[float, float]] = []
    y = tw
    row = 0

    def room_row(y0: float, corridor_side: str) -> float:
        nonlocal row
        depth = float(rng.uniform(*spec.room_depth_range))
        # each row gets its own partition of the corridor length
        w = rng.uniform(*spec.room_width_range, size=cols)
        w = w * (length - tw * (cols - 1)) / w.sum()
        x = x_start
        prev = None
        for c in range(cols):
            rect = (x, y0, x + float(w[c]), y0 + depth)
            rooms.append(rect)
            free.append(rect)
            dx = float(rng.uniform(rect[0] + 0.3, rect[2] - 0.3 - dw))
            if corridor_side == "below":
                free.append((dx, y0 - tw - 1e-6, dx + dw, y0 + 1e-6))
            else:
                free.append((dx, y0 + depth - 1e-6, dx + dw, y0 + depth + tw + 1e-6))
            if prev is not None and rng.uniform() < spec.internal_door_prob:
                dy = float(rng.uniform(y0 + 0.3, y0 + depth - 0.3 - dw))
                free.append((prev[2] - 1e-6, dy, rect[0] + 1e-6, dy + dw))
            prev = rect
            x = rect[2] + tw
        row += 1
        return y0 + depth

    for b in range(bands):
        has_below = row < rows
        if has_below:
            y = room_row(y, "above") + tw
        corridors.append((y, y + cw))
        free.append((tw, y, x_end, y + cw))
        y += cw + tw
        if row < rows:
            y = room_row(y, "below") + tw
    if bands > 1:
        free.append((tw, corridors[0][0], tw + cw, corridors[-1][1]))
    return Floorplan(tuple(free), tuple(rooms), (x_end + tw, y), len(corridors) + (bands > 1))


def _render(plan: Floorplan, to_plan: RigidTransform2D, resolution: float, margin: float) -> GridMap:
    """Rasterise ``plan`` into a grid whose frame maps onto the plan's frame by ``to_plan``."""
    w, h = plan.extent
    corners = np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])
    local = to_plan.inverse().apply(corners)
    lo = np.floor((local.min(axis=0) - margin) / resolution) * resolution
    hi = np.ceil((local.max(axis=0) + margin) / resolution) * resolution
    ncols, nrows = np.round((hi - lo) / resolution).astype(int)
    grid = GridMap(np.zeros((nrows, ncols), dtype=np.uint8), resolution, Point2(float(lo[0]), float(lo[1])))
    rows, cols = np.indices((nrows, ncols))
    centres = grid.cell_to_world(rows, cols)
    cells = plan.classify(to_plan.apply(centres))
    return GridMap(cells, resolution, grid.origin)


def generate_synthetic_pair(spec: SyntheticSpec) -> tuple[GridMap, GridMap, RigidTransform2D]:
    """Render a floorplan twice: B in the plan frame, A in a frame moved by ``spec.gt_transform``.

    The returned transform maps map-A coordinates onto map-B coordinates, i.e.
    it is what :func:`match_maps` (A onto B) should recover.
    """
    rng = np.random.default_rng(spec.seed)
    plan = build_floorplan(spec, rng)
    gt = spec.gt_transform
    map_b = _render(plan, RigidTransform2D.identity(), spec.resolution, spec.margin)
    map_a = _render(plan, gt, spec.resolution, spec.margin)
    cells = map_a.cells.copy()
    if spec.dropout > 0:
        occ = cells == Cell.OCCUPIED
        cells[occ & (rng.random(cells.shape) < spec.dropout)] = Cell.FREE
    if spec.speckle > 0:
        fr = cells == Cell.FREE
        cells[fr & (rng.random(cells.shape) < spec.speckle)] = Cell.OCCUPIED
    map_a = GridMap(cells, map_a.resolution, map_a.origin)
    return map_a, map_b, gt


def random_rigid(rng: np.random.Generator, max_translation: float = 5.0) -> RigidTransform2D:
    """Rotation uniform on the circle, translation uniform in a disc of radius ``max_translation``."""
    theta = float(rng.uniform(-math.pi, math.pi))
    r = max_translation * math.sqrt(float(rng.uniform()))
    phi = float(rng.uniform(-math.pi, math.pi))
    return RigidTransform2D(theta, r * math.cos(phi), r * math.sin(phi))


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass
class EvalReport:
    rotation_error_deg: float
    translation_error_m: float
    success: bool
    correctness_pct: float
    timings: dict[str, float] = field(default_factory=dict)
    runs: int = 1

    def to_dict(self, include_timings: bool = True) -> dict:
        d = {
            "rotation_error_deg": self.rotation_error_deg,
            "translation_error_m": self.translation_error_m,
            "success": self.success,
            "correctness_pct": self.correctness_pct,
            "runs": self.runs,
        }
        if include_timings:
            d["timings"] = dict(self.timings)
        return d


def evaluate(
    result: MatchResult | RigidTransform2D | None,
    gt: RigidTransform2D,
    tol_deg: float = DEFAULT_TOL_DEG,
    tol_m: float = 0.1,
    center: Point2 | None = None,
) -> EvalReport:
    """Compare an estimate with ground truth.

    Rotation error is the circular angle difference; translation error is the
    distance between where the two transforms send ``center`` (map A's free
    space centroid, say). ``None`` stands for a failed match.
    """
    if result is None:
        return EvalReport(180.0, math.inf, False, 0.0)
    T = result.transform if isinstance(result, MatchResult) else result
    timings = dict(result.timings) if isinstance(result, MatchResult) else {}
    c = np.array([0.0, 0.0]) if center is None else center.as_array()
    rot = math.degrees(circular_distance(T.theta, gt.theta))
    trans = float(np.hypot(*(T.apply(c) - gt.apply(c))))
    ok = rot <= tol_deg and trans <= tol_m
    return EvalReport(rot, trans, ok, 100.0 if ok else 0.0, timings)


def summarize(reports: Sequence[EvalReport]) -> EvalReport:
    """Pool repeated runs: mean errors over finite runs, percentage of successes."""
    if not reports:
        raise ValueError("no reports")
    finite = [r for r in reports if math.isfinite(r.translation_error_m)]
    keys = sorted({k for r in reports for k in r.timings})
    timings = {k: statistics.fmean(r.timings[k] for r in reports if k in r.timings) for k in keys}
    n_ok = sum(r.success for r in reports)
    return EvalReport(
        statistics.fmean(r.rotation_error_deg for r in reports),
        statistics.fmean(r.translation_error_m for r in finite) if finite else math.inf,
        n_ok == len(reports),
        100.0 * n_ok / len(reports),
        timings,
        runs=len(reports),
    )


def repeated_match(
    map_a, map_b, gt: RigidTransform2D, config: MatchConfig, repeats: int = DEFAULT_REPEATS,
    tol_deg: float = DEFAULT_TOL_DEG, tol_m: float = 0.1, center: Point2 | None = None,
) -> list[EvalReport]:
    """Match ``repeats`` times with seeds ``config.seed``, ``config.seed + 1``, ...

    Without a seed in ``config``, seeds start at 0.
    """
    base = config.seed or 0
    reports = []
    for r in range(repeats):
        try:
            res = match_maps(map_a, map_b, replace(config, seed=base + r))
        except MatchFailed:
            res = None
        reports.append(evaluate(res, gt, tol_deg, tol_m, center))
    return reports


# ---------------------------------------------------------------------------
# benchmark table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchCase:
    name: str
    map_a: GridMap
    map_b: GridMap
    gt: RigidTransform2D


@dataclass(frozen=True)
class BenchRow:
    name: str
    segmentation_s: float
    matching_s: float
    total_s: float
    correctness_pct: float


def bench(cases: Sequence[BenchCase], repeats: int = DEFAULT_REPEATS, config: MatchConfig | None = None,
          tol_deg: float = DEFAULT_TOL_DEG, tol_m: float | None = None) -> list[BenchRow]:
    """Full pipeline (segmentation included) ``repeats`` times per case; one row per case plus an average.

    ``tol_m`` defaults to two cells of the case's map B resolution.
    """
    if not cases:
        raise ValueError("bench needs at least one case")
    config = config or MatchConfig()
    rows = []
    for case in cases:
        tol = 2 * case.map_b.resolution if tol_m is None else tol_m
        center = case.map_a.free_centroid()
        seg, mat, tot, ok = [], [], [], 0
        for r in range(repeats):
            t0 = time.perf_counter()
            try:
                res = match_maps(case.map_a, case.map_b, replace(config, seed=(config.seed or 0) + r))
            except MatchFailed:
                res = None
            wall = time.perf_counter() - t0
            if res is not None:
                seg.append(res.timings["segmentation_s"])
                mat.append(res.timings["matching_s"])
                tot.append(max(wall, res.timings["total_s"]))
            else:
                tot.append(wall)
            ok += evaluate(res, case.gt, tol_deg, tol, center).success
        rows.append(BenchRow(
            case.name,
            statistics.fmean(seg) if seg else math.nan,
            statistics.fmean(mat) if mat else math.nan,
            statistics.fmean(tot),
            100.0 * ok / repeats,
        ))
    rows.append(BenchRow(
        "Average",
        statistics.fmean(r.segmentation_s for r in rows),
        statistics.fmean(r.matching_s for r in rows),
        statistics.fmean(r.total_s for r in rows),
        statistics.fmean(r.correctness_pct for r in rows),
    ))
    return rows


BENCH_HEADER = ("map", "Segmentation Time (s)", "Matching Time (s)", "Total Time (s)", "Correctness (%)")


def bench_to_csv(rows: Sequence[BenchRow]) -> str:
    lines = [",".join(BENCH_HEADER)]
    for r in rows:
        lines.append(f"{r.name},{r.segmentation_s:.4f},{r.matching_s:.4f},{r.total_s:.4f},{r.correctness_pct:.1f}")
    return "\n".join(lines) + "\n"


def bench_to_text(rows: Sequence[BenchRow]) -> str:
    cells = [BENCH_HEADER] + [
        (r.name, f"{r.segmentation_s:.3f}", f"{r.matching_s:.3f}", f"{r.total_s:.3f}", f"{r.correctness_pct:.1f}")
        for r in rows
    ]
    widths = [max(len(row[i]) for row in cells) for i in range(len(BENCH_HEADER))]
    out = []
    for n, row in enumerate(cells):
        out.append("  ".join(v.ljust(w) if i == 0 else v.rjust(w) for i, (v, w) in enumerate(zip(row, widths))))
        if n == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out) + "\n"
