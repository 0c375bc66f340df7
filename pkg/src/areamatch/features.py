"""Per-area shape features and the normalised pairwise feature costs.

All three costs are relative differences of homogeneous quantities, so they
live in [0, 1) and do not change when both maps are scaled by the same factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import DomainError
from .geometry import Point2, Segment2, convex_hull, hull_diameter, near_diameters
from .segmentation import Area


@dataclass(frozen=True)
class FeatureSet:
    area_size: float
    passage_distances: tuple[float, ...]
    hull_longest: float
    # passage_segments[n] joins the two passages measured by passage_distances[n]
    passage_segments: tuple[Segment2, ...] = ()
    hull_segment: Optional[Segment2] = None

    @property
    def has_passage_distances(self) -> bool:
        return len(self.passage_distances) > 0


# Chords this close to the hull diameter count as tied (both diagonals of a rectangle).
DIAMETER_TIE_TOL = 0.02


def _hull_segment(hull, passages: Sequence[Point2]) -> Segment2:
    """The hull diameter, with near-ties settled by which chord ends closest to the passages.

    Raster noise alone decides which of two equal diagonals is longest, and the
    two maps rarely agree; the passage centroid is a frame-independent tie-break.
    """
    if not passages:
        return hull_diameter(hull)
    candidates = near_diameters(hull, DIAMETER_TIE_TOL)
    if len(candidates) == 1:
        return candidates[0]
    cx = sum(p.x for p in passages) / len(passages)
    cy = sum(p.y for p in passages) / len(passages)
    c = Point2(cx, cy)
    return min(candidates, key=lambda s: min(s.a.distance(c), s.b.distance(c)))


def extract_features(area: Area) -> FeatureSet:
    polygon = area.polygon
    hull = convex_hull(polygon.vertices)
    hull_seg = _hull_segment(hull, area.passages)
    pairs = []
    for p, q in combinations(area.passages, 2):
        d = p.distance(q)
        if d > 0:
            pairs.append((d, Segment2(p, q)))
    pairs.sort(key=lambda item: item[0])
    return FeatureSet(
        area_size=polygon.area,
        passage_distances=tuple(d for d, _ in pairs),
        hull_longest=hull_diameter(hull).length,
        passage_segments=tuple(s for _, s in pairs),
        hull_segment=hull_seg,
    )


def area_size_cost(a_i: float, a_j: float) -> float:
    """Relative difference of the square roots of two area sizes."""
    if not (a_i > 0 and a_j > 0):
        raise DomainError(f"area sizes must be positive, got {a_i}, {a_j}")
    return abs(math.sqrt(a_i) - math.sqrt(a_j)) / math.sqrt(max(a_i, a_j))


def passage_distance_match(pd_i: Sequence[float], pd_j: Sequence[float]) -> tuple[float, int, int] | None:
    """Smallest relative difference over all passage-distance pairs, with its indices.

    Returns ``None`` when either list is empty. Ties go to the first pair in
    row-major order.
    """
    if len(pd_i) == 0 or len(pd_j) == 0:
        return None
    x = np.asarray(pd_i, dtype=float)[:, None]
    y = np.asarray(pd_j, dtype=float)[None, :]
    rel = np.abs(x - y) / np.maximum(x, y)
    flat = int(np.argmin(rel))
    n, m = divmod(flat, rel.shape[1])
    return float(rel[n, m]), n, m


def passage_distance_cost(pd_i: Sequence[float], pd_j: Sequence[float]) -> float | None:
    match = passage_distance_match(pd_i, pd_j)
    return None if match is None else match[0]


def hull_longest_cost(ld_i: float, ld_j: float) -> float:
    if not (ld_i > 0 and ld_j > 0):
        raise DomainError(f"hull lengths must be positive, got {ld_i}, {ld_j}")
    return abs(ld_i - ld_j) / max(ld_i, ld_j)


class FeatureCostVector(NamedTuple):
    """Costs ``(area, passage, hull)``; ``None`` marks an unavailable feature."""

    area: float
    passage: float | None
    hull: float | None


def feature_cost_vector(fa: FeatureSet, fb: FeatureSet) -> FeatureCostVector:
    """Area cost always; passage cost when both areas have passage distances, hull cost otherwise."""
    ca = area_size_cost(fa.area_size, fb.area_size)
    if fa.has_passage_distances and fb.has_passage_distances:
        return FeatureCostVector(ca, passage_distance_cost(fa.passage_distances, fb.passage_distances), None)
    return FeatureCostVector(ca, None, hull_longest_cost(fa.hull_longest, fb.hull_longest))
