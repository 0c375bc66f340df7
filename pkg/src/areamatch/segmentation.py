"""Split the free space of a grid map into polygonal areas joined by passages.

This is a compact distance-transform watershed, not a topology-graph
segmenter. Areas produced by any other tool can be fed to the matcher through
the area-graph file format instead (see :mod:`areamatch.map_io`).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, Iterable

import numpy as np
import shapely
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from skimage.measure import approximate_polygon, find_contours
from skimage.segmentation import watershed

from .errors import ConfigError, DegeneratePolygon, EmptyMapError, SingleAreaWarning
from .geometry import Point2, Polygon2
from .map_io import GridMap

if TYPE_CHECKING:
    from .features import FeatureSet

DEFAULT_WIDTH = 1.8  # metres
MIN_AREA = 1.0  # m^2; smaller watershed regions are merged into a neighbour
SHARED_PASSAGE_TOL = 1e-3  # metres


def _sorted_points(points: Iterable[Point2]) -> tuple[Point2, ...]:
    return tuple(sorted(points, key=lambda p: (p.x, p.y)))


@dataclass(frozen=True, eq=False)
class Area:
    id: int
    polygon: Polygon2
    passages: tuple[Point2, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "passages", _sorted_points(self.passages))

    @cached_property
    def features(self) -> FeatureSet:
        from .features import extract_features

        return extract_features(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Area):
            return NotImplemented
        return self.id == other.id and self.polygon == other.polygon and self.passages == other.passages

    __hash__ = None  # type: ignore[assignment]


def passages_of(area: Area) -> list[Point2]:
    """Passage points of ``area`` ordered by x, then y."""
    return list(area.passages)


@dataclass(frozen=True, eq=False)
class AreaGraph:
    areas: tuple[Area, ...]
    adjacency: frozenset[tuple[int, int]] = frozenset()
    resolution: float = 0.0
    source: str | None = None
    _index: dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "areas", tuple(self.areas))
        object.__setattr__(self, "_index", {a.id: i for i, a in enumerate(self.areas)})

    @classmethod
    def from_areas(cls, areas: Iterable[Area], resolution: float, source: str | None = None) -> AreaGraph:
        """Build a graph, deriving adjacency from passage points two areas share."""
        areas = tuple(areas)
        adjacency = set()
        for i, a in enumerate(areas):
            if not a.passages:
                continue
            pa = np.array([tuple(p) for p in a.passages])
            for b in areas[i + 1 :]:
                if not b.passages:
                    continue
                pb = np.array([tuple(p) for p in b.passages])
                d = np.hypot(*(pa[:, None, :] - pb[None, :, :]).transpose(2, 0, 1))
                if d.min() <= SHARED_PASSAGE_TOL:
                    adjacency.add((min(a.id, b.id), max(a.id, b.id)))
        return cls(areas, frozenset(adjacency), resolution, source)

    def __len__(self) -> int:
        return len(self.areas)

    def __iter__(self):
        return iter(self.areas)

    def by_id(self, area_id: int) -> Area:
        return self.areas[self._index[area_id]]

    def index_of(self, area_id: int) -> int:
        return self._index[area_id]

    @property
    def ids(self) -> list[int]:
        return [a.id for a in self.areas]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AreaGraph):
            return NotImplemented
        return (
            self.areas == other.areas
            and self.adjacency == other.adjacency
            and self.resolution == other.resolution
            and self.source == other.source
        )

    __hash__ = None  # type: ignore[assignment]


# ---------------------------------------------------------------------------
# watershed segmentation
# ---------------------------------------------------------------------------


def _merge_small_regions(labels: np.ndarray, min_cells: float) -> None:
    """Fold regions below ``min_cells`` into their largest neighbour (in place).

    Regions with no labelled neighbour are dropped.
    """
    while True:
        sizes = np.bincount(labels.ravel())
        present = np.flatnonzero(sizes)
        present = present[present > 0]
        if len(present) <= 1:
            return
        small = [l for l in present if sizes[l] < min_cells]
        if not small:
            return
        l = min(small, key=lambda v: (sizes[v], v))
        sl = ndimage.find_objects((labels == l).astype(np.int8))[0]
        sl = tuple(slice(max(s.start - 1, 0), s.stop + 1) for s in sl)
        window = labels[sl]
        mask = window == l
        ring = ndimage.binary_dilation(mask) & ~mask
        neighbours = np.unique(window[ring])
        neighbours = neighbours[(neighbours > 0) & (neighbours != l)]
        if len(neighbours) == 0:
            window[mask] = 0
        else:
            target = min(neighbours, key=lambda v: (-sizes[v], v))
            window[mask] = target


def _region_polygon(mask: np.ndarray, offset: tuple[int, int], grid: GridMap) -> Polygon2 | None:
    """Outer boundary of a binary region, Douglas-Peucker simplified to one cell."""
    padded = np.pad(mask, 1).astype(float)
    contours = find_contours(padded, 0.5)
    if not contours:
        return None

    def ring_area(c: np.ndarray) -> float:
        return abs(0.5 * float(np.dot(c[:, 0], np.roll(c[:, 1], -1)) - np.dot(np.roll(c[:, 0], -1), c[:, 1])))

    outer = max(contours, key=ring_area)
    r0, c0 = offset[0] - 1, offset[1] - 1
    for candidate in (approximate_polygon(outer, tolerance=1.0), outer):
        xy = grid.cell_to_world(candidate[:, 0] + r0, candidate[:, 1] + c0)
        try:
            return Polygon2(xy)
        except DegeneratePolygon:
            continue
    fixed = shapely.make_valid(shapely.Polygon(grid.cell_to_world(outer[:, 0] + r0, outer[:, 1] + c0)))
    parts = [g for g in getattr(fixed, "geoms", [fixed]) if isinstance(g, shapely.Polygon) and not g.is_empty]
    if not parts:
        return None
    best = max(parts, key=lambda g: g.area)
    try:
        return Polygon2(np.asarray(best.exterior.coords))
    except DegeneratePolygon:
        return None


def _interfaces(labels: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
    """Half-cell points between 4-adjacent cells of different regions, keyed by label pair."""
    found: dict[tuple[int, int], list[np.ndarray]] = {}
    for axis in (0, 1):
        a = labels[:-1, :] if axis == 0 else labels[:, :-1]
        b = labels[1:, :] if axis == 0 else labels[:, 1:]
        hit = (a > 0) & (b > 0) & (a != b)
        rows, cols = np.nonzero(hit)
        la, lb = a[hit], b[hit]
        pts = np.stack((rows + (0.5 if axis == 0 else 0.0), cols + (0.5 if axis == 1 else 0.0)), axis=1)
        lo, hi = np.minimum(la, lb), np.maximum(la, lb)
        for key in set(zip(lo.tolist(), hi.tolist())):
            sel = (lo == key[0]) & (hi == key[1])
            found.setdefault(key, []).append(pts[sel])
    return {k: np.concatenate(v) for k, v in found.items()}


def _passage_point(points: np.ndarray) -> np.ndarray | None:
    """Midpoint of the dominant run of shared boundary (in cell coordinates)."""
    if len(points) < 2:
        return None
    pts = points[np.lexsort((points[:, 1], points[:, 0]))]
    pairs = cKDTree(pts).query_pairs(1.5, output_type="ndarray")
    n = len(pts)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, comp = connected_components(graph, directed=False)
    counts = np.bincount(comp)
    run = pts[comp == int(np.argmax(counts))]
    if len(run) < 2:
        return None
    return run.mean(axis=0)


def segment_grid_map(
    grid: GridMap,
    width_param: float = DEFAULT_WIDTH,
    *,
    min_area: float = MIN_AREA,
    source: str | None = None,
) -> AreaGraph:
    """Partition free space into areas with a distance-transform watershed.

    Seeds are the connected parts of free space farther than ``width_param / 2``
    from any non-free cell. Every free cell reachable from a seed is flooded to
    it along the descending distance transform. Two areas that touch get one
    passage point at the middle of their longest shared boundary run.
    """
    if not width_param > 0:
        raise ConfigError(f"width must be positive, got {width_param}")
    free = grid.free
    if not free.any():
        raise EmptyMapError("map has no free cells")
    res = grid.resolution

    padded = np.pad(free, 1, constant_values=False)
    dist = ndimage.distance_transform_edt(padded) * res
    markers, n_seeds = ndimage.label(dist > width_param / 2.0)
    if n_seeds == 0:
        markers = np.zeros(padded.shape, dtype=np.int32)
        markers[np.unravel_index(int(np.argmax(dist)), dist.shape)] = 1
    labels = watershed(-dist, markers, mask=padded)[1:-1, 1:-1].astype(np.int32)

    _merge_small_regions(labels, min_area / (res * res))

    region_ids = np.unique(labels)
    region_ids = region_ids[region_ids > 0]
    slices = ndimage.find_objects(labels)
    polygons: dict[int, Polygon2] = {}
    for l in region_ids:
        sl = slices[l - 1]
        poly = _region_polygon(labels[sl] == l, (sl[0].start, sl[1].start), grid)
        if poly is not None:
            polygons[int(l)] = poly
    kept = sorted(polygons)
    area_id = {l: i for i, l in enumerate(kept)}

    passages: dict[int, list[Point2]] = {l: [] for l in kept}
    adjacency = set()
    for (la, lb), pts in sorted(_interfaces(labels).items()):
        if la not in area_id or lb not in area_id:
            continue
        mid = _passage_point(pts)
        if mid is None:
            continue
        x, y = grid.cell_to_world(mid[0], mid[1])
        p = Point2(float(x), float(y))
        passages[la].append(p)
        passages[lb].append(p)
        adjacency.add((area_id[la], area_id[lb]))

    areas = tuple(Area(area_id[l], polygons[l], tuple(passages[l])) for l in kept)
    if len(areas) == 0:
        raise EmptyMapError("segmentation produced no areas")
    if len(areas) < 2:
        warnings.warn("segmentation produced a single area", SingleAreaWarning, stacklevel=2)
    return AreaGraph(areas, frozenset(adjacency), res, source)
