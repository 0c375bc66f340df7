"""Occupancy-grid loading, area-graph interchange files and alignment renders.

Grid convention: ``GridMap.cells[r, c]`` has its centre at
``origin + ((c + 0.5) * res, (r + 0.5) * res)`` with the world y axis pointing up,
so row 0 of the array is the *bottom* row of the source image. Images are
flipped once, on load and on save.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import TYPE_CHECKING

import jsonschema
import numpy as np
import shapely
from PIL import Image

from .errors import ConfigError, FormatError, IoError
from .geometry import Point2, Polygon2, RigidTransform2D

if TYPE_CHECKING:
    from .segmentation import AreaGraph

DEFAULT_FREE_THRESHOLD = 250
DEFAULT_OCCUPIED_THRESHOLD = 50
PASSAGE_BOUNDARY_TOL = 0.5  # metres
AREA_GRAPH_VERSION = 1

# grey levels used when writing grids back to images
_PIXEL = {0: 255, 1: 0, 2: 205}


class Cell(IntEnum):
    FREE = 0
    OCCUPIED = 1
    UNKNOWN = 2


@dataclass(frozen=True, eq=False)
class GridMap:
    cells: np.ndarray  # (height, width) uint8 of Cell values, row 0 = bottom
    resolution: float
    origin: Point2 = field(default_factory=lambda: Point2(0.0, 0.0))

    def __post_init__(self) -> None:
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise ConfigError(f"resolution must be positive, got {self.resolution}")
        cells = np.asarray(self.cells, dtype=np.uint8)
        if cells.ndim != 2 or cells.size == 0:
            raise FormatError(f"grid must be a non-empty 2D array, got shape {cells.shape}")
        if cells.max(initial=0) > Cell.UNKNOWN:
            raise FormatError("grid cells must be Cell values (0, 1, 2)")
        object.__setattr__(self, "cells", cells)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def free(self) -> np.ndarray:
        return self.cells == Cell.FREE

    @property
    def occupied(self) -> np.ndarray:
        return self.cells == Cell.OCCUPIED

    def cell_to_world(self, rows, cols) -> np.ndarray:
        """Metric centres of cells; accepts scalars or arrays (also fractional indices)."""
        r = np.asarray(rows, dtype=float)
        c = np.asarray(cols, dtype=float)
        return np.stack(
            (self.origin.x + (c + 0.5) * self.resolution, self.origin.y + (r + 0.5) * self.resolution), axis=-1
        )

    def world_to_cell(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Integer (row, col) of the cell containing each point. May be out of bounds."""
        p = np.asarray(points, dtype=float)
        cols = np.floor((p[..., 0] - self.origin.x) / self.resolution).astype(np.int64)
        rows = np.floor((p[..., 1] - self.origin.y) / self.resolution).astype(np.int64)
        return rows, cols

    def in_bounds(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return (rows >= 0) & (rows < self.height) & (cols >= 0) & (cols < self.width)

    def free_centroid(self) -> Point2:
        rows, cols = np.nonzero(self.free)
        if len(rows) == 0:
            rows, cols = np.nonzero(np.ones_like(self.cells, dtype=bool))
        x, y = self.cell_to_world(rows.mean(), cols.mean())
        return Point2(float(x), float(y))

    def to_image(self) -> np.ndarray:
        """8-bit grey image, top row first."""
        lut = np.array([_PIXEL[0], _PIXEL[1], _PIXEL[2]], dtype=np.uint8)
        return lut[self.cells][::-1]


def load_grid_map(
    path: str | Path,
    resolution: float,
    free_threshold: int = DEFAULT_FREE_THRESHOLD,
    occupied_threshold: int = DEFAULT_OCCUPIED_THRESHOLD,
    origin: Point2 | None = None,
) -> GridMap:
    """Read an 8-bit greyscale PGM/PNG and binarise it into Free/Occupied/Unknown."""
    if not (resolution > 0 and math.isfinite(resolution)):
        raise ConfigError(f"resolution must be positive, got {resolution}")
    if not (0 < occupied_threshold < free_threshold <= 255):
        raise ConfigError(
            f"need 0 < occupied_threshold < free_threshold <= 255, got {occupied_threshold}, {free_threshold}"
        )
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            pixels = np.asarray(img)
    except FileNotFoundError as exc:
        raise IoError(f"cannot read map {path}: {exc.strerror}") from exc
    except OSError as exc:
        raise IoError(f"cannot read map {path}: {exc}") from exc
    if mode != "L":
        raise FormatError(f"{path}: expected 8-bit greyscale image, got mode {mode!r}")
    return grid_from_image(pixels, resolution, free_threshold, occupied_threshold, origin)


def grid_from_image(
    pixels: np.ndarray,
    resolution: float,
    free_threshold: int = DEFAULT_FREE_THRESHOLD,
    occupied_threshold: int = DEFAULT_OCCUPIED_THRESHOLD,
    origin: Point2 | None = None,
) -> GridMap:
    img = np.asarray(pixels)[::-1]
    cells = np.full(img.shape, Cell.UNKNOWN, dtype=np.uint8)
    cells[img >= free_threshold] = Cell.FREE
    cells[img <= occupied_threshold] = Cell.OCCUPIED
    return GridMap(cells, resolution, origin or Point2(0.0, 0.0))


def save_grid_map(grid: GridMap, path: str | Path) -> None:
    """Write the grid as a greyscale image; the format follows the file suffix."""
    try:
        Image.fromarray(np.ascontiguousarray(grid.to_image()), mode="L").save(path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# area-graph interchange
# ---------------------------------------------------------------------------

_XY = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

AREA_GRAPH_SCHEMA = {
    "type": "object",
    "required": ["version", "resolution", "areas"],
    "properties": {
        "version": {"const": AREA_GRAPH_VERSION},
        "resolution": {"type": "number", "exclusiveMinimum": 0},
        "source": {"type": ["string", "null"]},
        "areas": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "polygon", "passages"],
                "properties": {
                    "id": {"type": "integer"},
                    "polygon": {"type": "array", "items": _XY, "minItems": 3},
                    "passages": {"type": "array", "items": _XY},
                },
            },
        },
    },
}


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path)


def area_graph_from_dict(doc: object) -> AreaGraph:
    from .segmentation import Area, AreaGraph

    validator = jsonschema.Draft202012Validator(AREA_GRAPH_SCHEMA)
    error = jsonschema.exceptions.best_match(validator.iter_errors(doc))
    if error is not None:
        raise FormatError(error.message, _pointer(error.absolute_path))
    assert isinstance(doc, dict)

    areas = []
    seen: set[int] = set()
    for i, entry in enumerate(doc["areas"]):
        loc = f"/areas/{i}"
        if entry["id"] in seen:
            raise FormatError(f"duplicate area id {entry['id']}", loc + "/id")
        seen.add(entry["id"])
        try:
            poly = Polygon2(entry["polygon"])
        except ValueError as exc:
            raise FormatError(str(exc), loc + "/polygon") from exc
        passages = [Point2(float(x), float(y)) for x, y in entry["passages"]]
        for j, p in enumerate(passages):
            if poly.shape.exterior.distance(_shapely_point(p)) > PASSAGE_BOUNDARY_TOL:
                raise FormatError(
                    f"passage farther than {PASSAGE_BOUNDARY_TOL} m from the area boundary", f"{loc}/passages/{j}"
                )
        areas.append(Area(id=int(entry["id"]), polygon=poly, passages=tuple(passages)))
    return AreaGraph.from_areas(areas, resolution=float(doc["resolution"]), source=doc.get("source"))


def _shapely_point(p: Point2):
    return shapely.Point(p.x, p.y)


def area_graph_to_dict(graph: AreaGraph) -> dict:
    doc: dict = {"version": AREA_GRAPH_VERSION, "resolution": graph.resolution}
    if graph.source is not None:
        doc["source"] = graph.source
    doc["areas"] = [
        {
            "id": a.id,
            "polygon": [[float(x), float(y)] for x, y in a.polygon.vertices],
            "passages": [[p.x, p.y] for p in a.passages],
        }
        for a in graph.areas
    ]
    return doc


def dumps_area_graph(graph: AreaGraph) -> str:
    # json writes floats with repr(), i.e. the shortest round-tripping form (<= 17 digits)
    return json.dumps(area_graph_to_dict(graph), indent=1) + "\n"


def read_area_graph(path: str | Path) -> AreaGraph:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read area graph {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg} (line {exc.lineno})") from exc
    return area_graph_from_dict(doc)


def write_area_graph(graph: AreaGraph, path: str | Path) -> None:
    try:
        Path(path).write_text(dumps_area_graph(graph), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write area graph {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def warp_occupancy(source: GridMap, T: RigidTransform2D, target: GridMap) -> np.ndarray:
    """Occupied mask of ``source`` moved by ``T`` and resampled onto ``target``'s grid.

    Each target cell centre is pulled back through ``T``'s inverse and looked up
    (nearest cell) in ``source``.
    """
    rows, cols = np.indices(target.cells.shape)
    centres = target.cell_to_world(rows, cols)
    back = T.inverse().apply(centres)
    r, c = source.world_to_cell(back)
    inside = source.in_bounds(r, c)
    out = np.zeros(target.cells.shape, dtype=bool)
    out[inside] = source.occupied[r[inside], c[inside]]
    return out


def render_alignment(map_a: GridMap, map_b: GridMap, T: RigidTransform2D, path: str | Path) -> np.ndarray:
    """Overlay map A (moved by ``T``) in red at 50% alpha on map B's occupied cells in grey.

    Written in map B's frame. Returns the RGB array that was saved.
    """
    a_occ = warp_occupancy(map_a, T, map_b)
    b_occ = map_b.occupied
    rgb = np.full(map_b.cells.shape + (3,), 255.0)
    rgb[b_occ] = (128.0, 128.0, 128.0)
    red = np.array([255.0, 0.0, 0.0])
    rgb[a_occ] = 0.5 * rgb[a_occ] + 0.5 * red
    img = np.round(rgb).astype(np.uint8)[::-1]
    try:
        Image.fromarray(np.ascontiguousarray(img), mode="RGB").save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write render {path}: {exc}") from exc
    return img
