"""2D polygon and rigid-transform primitives.

Everything here works in metres. Polygons are stored counter-clockwise as
read-only ``(N, 2)`` float arrays; intersection areas are delegated to GEOS
through shapely, everything else is plain numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence, TypeVar, Union, overload

import numpy as np
import shapely

from .errors import DegeneratePolygon

POINT_EPS = 1e-9
AREA_EPS = 1e-12
TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# angles
# ---------------------------------------------------------------------------


def normalize_angle(angle: float) -> float:
    """Wrap ``angle`` into the half-open interval (-pi, pi]."""
    a = math.remainder(angle, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    return a


def circular_distance(a: float, b: float) -> float:
    """Unsigned angular separation of two angles, in [0, pi]."""
    return abs(normalize_angle(a - b))


def circular_mean(angles: Iterable[float]) -> float:
    """Mean direction from summed unit vectors, wrapped into (-pi, pi]."""
    s = c = 0.0
    for a in angles:
        s += math.sin(a)
        c += math.cos(a)
    return normalize_angle(math.atan2(s, c))


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Point2:
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self) -> Iterator[float]:
        yield self.x
        yield self.y

    def distance(self, other: Point2) -> float:
        return math.hypot(other.x - self.x, other.y - self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True, slots=True)
class Segment2:
    a: Point2
    b: Point2

    def __post_init__(self) -> None:
        if self.a.distance(self.b) <= POINT_EPS:
            raise ValueError("segment endpoints coincide")

    @property
    def length(self) -> float:
        return self.a.distance(self.b)

    @property
    def midpoint(self) -> Point2:
        return Point2(0.5 * (self.a.x + self.b.x), 0.5 * (self.a.y + self.b.y))

    @property
    def direction(self) -> float:
        """Angle of the directed segment a->b."""
        return math.atan2(self.b.y - self.a.y, self.b.x - self.a.x)


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


class Polygon2:
    """Simple polygon, implicitly closed, normalised to counter-clockwise order.

    Raises DegeneratePolygon for fewer than three vertices, (near) zero area, or
    a self-intersecting boundary.
    """

    def __init__(self, vertices: Sequence[Sequence[float]] | np.ndarray, *, check_simple: bool = True):
        v = np.array(vertices, dtype=float).reshape(-1, 2)
        if len(v) > 1 and np.allclose(v[0], v[-1], rtol=0.0, atol=POINT_EPS):
            v = v[:-1]
        if len(v) < 3:
            raise DegeneratePolygon(f"polygon needs >= 3 vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise DegeneratePolygon("polygon has non-finite coordinates")
        signed = _shoelace(v)
        if abs(signed) < AREA_EPS:
            raise DegeneratePolygon(f"polygon area {abs(signed):.3g} below {AREA_EPS}")
        if signed < 0:
            v = v[::-1].copy()
        v.setflags(write=False)
        self.vertices = v
        self._area = abs(signed)
        if check_simple and not self.shape.is_valid:
            raise DegeneratePolygon("polygon boundary is not simple")

    @classmethod
    def _trusted(cls, v: np.ndarray) -> Polygon2:
        # Rigid images of an already validated polygon stay simple and CCW.
        return cls(v, check_simple=False)

    @property
    def area(self) -> float:
        return self._area

    @cached_property
    def shape(self) -> shapely.Polygon:
        return shapely.Polygon(self.vertices)

    def __len__(self) -> int:
        return len(self.vertices)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polygon2):
            return NotImplemented
        return self.vertices.shape == other.vertices.shape and bool(np.array_equal(self.vertices, other.vertices))

    def __hash__(self) -> int:
        return hash(self.vertices.tobytes())

    def __repr__(self) -> str:
        return f"Polygon2({len(self)} vertices, area={self._area:.6g})"


@dataclass(frozen=True, slots=True)
class RigidTransform2D:
    """Rotation by ``theta`` about the origin followed by translation ``(tx, ty)``."""

    theta: float = 0.0
    tx: float = 0.0
    ty: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.theta, self.tx, self.ty)):
            raise ValueError("non-finite transform parameters")
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))
        object.__setattr__(self, "tx", float(self.tx))
        object.__setattr__(self, "ty", float(self.ty))

    @classmethod
    def identity(cls) -> RigidTransform2D:
        return cls(0.0, 0.0, 0.0)

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.tx, self.ty])

    @property
    def rotation_matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def matrix(self) -> np.ndarray:
        m = np.eye(3)
        m[:2, :2] = self.rotation_matrix
        m[:2, 2] = (self.tx, self.ty)
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an ``(N, 2)`` array of points."""
        p = np.asarray(points, dtype=float)
        c, s = math.cos(self.theta), math.sin(self.theta)
        x, y = p[..., 0], p[..., 1]
        return np.stack((c * x - s * y + self.tx, s * x + c * y + self.ty), axis=-1)

    def inverse(self) -> RigidTransform2D:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return RigidTransform2D(-self.theta, -(c * self.tx + s * self.ty), s * self.tx - c * self.ty)

    def compose(self, other: RigidTransform2D) -> RigidTransform2D:
        """``self ∘ other``: apply ``other`` first."""
        tx, ty = self.apply(np.array([other.tx, other.ty]))
        return RigidTransform2D(self.theta + other.theta, float(tx), float(ty))

    def to_dict(self) -> dict:
        return {"theta_rad": self.theta, "t": [self.tx, self.ty]}

    @classmethod
    def from_dict(cls, d: dict) -> RigidTransform2D:
        tx, ty = d["t"]
        return cls(float(d["theta_rad"]), float(tx), float(ty))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def polygon_area(p: Polygon2 | Sequence[Sequence[float]]) -> float:
    """Positive shoelace area of a simple polygon."""
    if not isinstance(p, Polygon2):
        p = Polygon2(p)
    return p.area


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def convex_hull(points: Iterable[Point2 | Sequence[float]] | np.ndarray) -> Polygon2:
    """Andrew's monotone chain. Collinear boundary points are dropped."""
    pts = np.unique(np.array([tuple(p) for p in points] if not isinstance(points, np.ndarray) else points,
                             dtype=float).reshape(-1, 2), axis=0)  # lexicographic sort
    if len(pts) < 3:
        raise DegeneratePolygon("convex hull needs >= 3 distinct points")

    def chain(seq: np.ndarray) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for p in seq:
            while len(out) >= 2 and _cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    if len(hull) < 3:
        raise DegeneratePolygon("all points are collinear")
    return Polygon2._trusted(hull)


def _antipodal_chords(h: np.ndarray) -> list[tuple[float, int, int]]:
    """(length, i, j) for every antipodal vertex pair of a CCW convex polygon (rotating calipers)."""
    n = len(h)
    out = []
    j = 1
    for i in range(n):
        ni = (i + 1) % n
        while _cross(h[i], h[ni], h[(j + 1) % n]) > _cross(h[i], h[ni], h[j]):
            j = (j + 1) % n
        for a, b in ((i, j), (ni, j)):
            out.append((math.hypot(h[b][0] - h[a][0], h[b][1] - h[a][1]), a, b))
    return out


def hull_diameter(p: Polygon2) -> Segment2:
    """Longest vertex-to-vertex chord of a convex polygon.

    Ties resolve to the first antipodal pair encountered from vertex 0.
    """
    h = p.vertices
    d, a, b = max(_antipodal_chords(h), key=lambda c: c[0])  # max keeps the first maximum
    return Segment2(Point2(*h[a]), Point2(*h[b]))


def near_diameters(p: Polygon2, rel_tol: float) -> list[Segment2]:
    """Chords of a convex polygon within ``rel_tol`` of its diameter, longest first."""
    h = p.vertices
    chords = _antipodal_chords(h)
    longest = max(c[0] for c in chords)
    seen = set()
    out = []
    for d, a, b in sorted(chords, key=lambda c: -c[0]):
        key = (min(a, b), max(a, b))
        if d >= (1.0 - rel_tol) * longest and key not in seen:
            seen.add(key)
            out.append(Segment2(Point2(*h[a]), Point2(*h[b])))
    return out


def hull_longest_distance(p: Polygon2) -> float:
    return hull_diameter(p).length


def polygon_overlap_area(p: Polygon2, q: Polygon2) -> float:
    """Area of the intersection of two simple (possibly concave) polygons."""
    if not shapely.intersects(p.shape, q.shape):
        return 0.0
    a = float(shapely.area(shapely.intersection(p.shape, q.shape)))
    return min(max(a, 0.0), p.area, q.area)


G = TypeVar("G", Point2, Segment2, Polygon2)


@overload
def apply_rigid(T: RigidTransform2D, g: Point2) -> Point2: ...
@overload
def apply_rigid(T: RigidTransform2D, g: Segment2) -> Segment2: ...
@overload
def apply_rigid(T: RigidTransform2D, g: Polygon2) -> Polygon2: ...


def apply_rigid(T: RigidTransform2D, g: Union[Point2, Segment2, Polygon2]):
    if isinstance(g, Point2):
        x, y = T.apply(np.array([g.x, g.y]))
        return Point2(float(x), float(y))
    if isinstance(g, Segment2):
        return Segment2(apply_rigid(T, g.a), apply_rigid(T, g.b))
    if isinstance(g, Polygon2):
        return Polygon2._trusted(T.apply(g.vertices))
    raise TypeError(f"cannot transform {type(g).__name__}")


def rotation_between_segments(sA: Segment2, sB: Segment2) -> float:
    """Angle rotating the direction of ``sA`` onto that of ``sB``, in (-pi, pi].

    Segments are undirected, so ``theta + pi`` is an equally valid answer; see
    :func:`rotation_candidates`.
    """
    return normalize_angle(sB.direction - sA.direction)


def rotation_candidates(sA: Segment2, sB: Segment2) -> tuple[float, float]:
    theta = rotation_between_segments(sA, sB)
    return theta, normalize_angle(theta + math.pi)


def transform_from_match(theta: float, pA: Point2, pB: Point2) -> RigidTransform2D:
    """Rotate by ``theta`` about ``pA``, then move ``pA`` onto ``pB``."""
    c, s = math.cos(theta), math.sin(theta)
    return RigidTransform2D(theta, pB.x - (c * pA.x - s * pA.y), pB.y - (s * pA.x + c * pA.y))
