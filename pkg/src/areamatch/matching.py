"""Weighted area cost matrix, mutual k-nearest matching and the weight sweep."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import ConfigError, EmptyGraphError
from .features import area_size_cost, hull_longest_cost, passage_distance_match
from .geometry import Segment2
from .segmentation import AreaGraph

if TYPE_CHECKING:
    from .transform_estimation import MatchConfig

DEFAULT_K = 3


@dataclass(frozen=True)
class WeightVector:
    w_a: float = 0.1
    w_p: float = 0.1
    w_l: float = 0.8

    def __post_init__(self) -> None:
        w = (self.w_a, self.w_p, self.w_l)
        if not all(math.isfinite(v) and v >= 0 for v in w):
            raise ConfigError(f"weights must be finite and non-negative, got {w}")
        if abs(sum(w) - 1.0) > 1e-9:
            raise ConfigError(f"weights must sum to 1, got {sum(w)}")

    @classmethod
    def parse(cls, text: str) -> WeightVector:
        try:
            parts = [float(v) for v in text.split(",")]
        except ValueError as exc:
            raise ConfigError(f"cannot parse weights {text!r}") from exc
        if len(parts) != 3:
            raise ConfigError(f"expected three comma-separated weights, got {text!r}")
        return cls(*parts)

    def as_array(self) -> np.ndarray:
        return np.array([self.w_a, self.w_p, self.w_l])

    def __str__(self) -> str:
        return f"{self.w_a:g},{self.w_p:g},{self.w_l:g}"


class SegmentKind(Enum):
    PASSAGE_DISTANCE = "passage_distance"
    HULL_LONGEST = "hull_longest"


@dataclass(frozen=True)
class MatchPair:
    area_id_a: int
    area_id_b: int
    total_cost: float
    segment_a: Segment2 | None = None
    segment_b: Segment2 | None = None
    segment_kind: SegmentKind | None = None


@dataclass(frozen=True, eq=False)
class FeatureCostTable:
    """Raw per-feature costs between every area pair; NaN marks an unavailable feature.

    ``passage_argmin[i, j]`` holds the indices of the passage-distance pair that
    attains the passage cost (``-1`` when unavailable).
    """

    costs: np.ndarray  # (nA, nB, 3)
    passage_argmin: np.ndarray  # (nA, nB, 2) int
    graph_a: AreaGraph
    graph_b: AreaGraph

    @classmethod
    def build(cls, graph_a: AreaGraph, graph_b: AreaGraph) -> FeatureCostTable:
        if len(graph_a) == 0 or len(graph_b) == 0:
            raise EmptyGraphError("both area graphs need at least one area")
        fa = [a.features for a in graph_a.areas]
        fb = [b.features for b in graph_b.areas]
        costs = np.full((len(fa), len(fb), 3), np.nan)
        argmin = np.full((len(fa), len(fb), 2), -1, dtype=np.int64)
        for i, x in enumerate(fa):
            for j, y in enumerate(fb):
                costs[i, j, 0] = area_size_cost(x.area_size, y.area_size)
                if x.has_passage_distances and y.has_passage_distances:
                    c, n, m = passage_distance_match(x.passage_distances, y.passage_distances)
                    costs[i, j, 1] = c
                    argmin[i, j] = (n, m)
                else:
                    costs[i, j, 2] = hull_longest_cost(x.hull_longest, y.hull_longest)
        return cls(costs, argmin, graph_a, graph_b)

    def weighted(self, w: WeightVector | Sequence[float]) -> np.ndarray:
        return combine_costs(self.costs, w)


def combine_costs(costs: np.ndarray, w: WeightVector | Sequence[float]) -> np.ndarray:
    """Weighted sum over the available features, weights renormalised per entry.

    When every available feature carries zero weight the entry falls back to the
    plain mean of its available costs.
    """
    weights = w.as_array() if isinstance(w, WeightVector) else np.asarray(w, dtype=float)
    active = ~np.isnan(costs)
    d = np.where(active, costs, 0.0)
    wa = np.where(active, weights, 0.0)
    wsum = wa.sum(axis=-1)
    uniform = wsum <= 0
    if np.any(uniform):
        wa = np.where(uniform[..., None], active.astype(float), wa)
        wsum = wa.sum(axis=-1)
    return (wa * d).sum(axis=-1) / wsum


@dataclass(frozen=True, eq=False)
class CostMatrix:
    values: np.ndarray  # rows: areas of A, cols: areas of B
    ids_a: tuple[int, ...]
    ids_b: tuple[int, ...]
    table: FeatureCostTable | None = None

    @classmethod
    def from_array(cls, values, ids_a: Sequence[int] | None = None, ids_b: Sequence[int] | None = None) -> CostMatrix:
        v = np.asarray(values, dtype=float)
        return cls(
            v,
            tuple(range(v.shape[0])) if ids_a is None else tuple(ids_a),
            tuple(range(v.shape[1])) if ids_b is None else tuple(ids_b),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def transpose(self) -> CostMatrix:
        return CostMatrix(self.values.T.copy(), self.ids_b, self.ids_a, None)


def cost_matrix(
    graph_a: AreaGraph,
    graph_b: AreaGraph,
    w: WeightVector | Sequence[float] = WeightVector(),
    table: FeatureCostTable | None = None,
) -> CostMatrix:
    table = table or FeatureCostTable.build(graph_a, graph_b)
    return CostMatrix(table.weighted(w), tuple(graph_a.ids), tuple(graph_b.ids), table)


def _rank_positions(values: np.ndarray, tie_ids: Sequence[int]) -> np.ndarray:
    """rank[i, j] = 0-based position of column j in row i sorted by (cost, id)."""
    ids = np.asarray(tie_ids)
    rank = np.empty(values.shape, dtype=np.int64)
    for i, row in enumerate(values):
        order = np.lexsort((ids, row))
        rank[i, order] = np.arange(len(order))
    return rank


def mutual_knn_indices(values: np.ndarray, k: int, ids_a: Sequence[int] | None = None,
                       ids_b: Sequence[int] | None = None) -> list[tuple[int, int]]:
    """Index pairs (i, j) where each is among the other's ``k`` cheapest matches."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    values = np.asarray(values, dtype=float)
    ids_a = range(values.shape[0]) if ids_a is None else ids_a
    ids_b = range(values.shape[1]) if ids_b is None else ids_b
    row_rank = _rank_positions(values, list(ids_b))
    col_rank = _rank_positions(values.T, list(ids_a)).T
    ii, jj = np.nonzero((row_rank < k) & (col_rank < k))
    return list(zip(ii.tolist(), jj.tolist()))


def mutual_knn_pairs(M: CostMatrix, k: int = DEFAULT_K) -> list[MatchPair]:
    """Mutual k-nearest area pairs, cheapest first (ties by area ids).

    When ``M`` was built from area graphs each pair carries the segments used
    for transform estimation: the arg-min passage pair if both areas have
    passage distances, otherwise the two hull diameters.
    """
    pairs = []
    for i, j in mutual_knn_indices(M.values, k, M.ids_a, M.ids_b):
        seg_a = seg_b = kind = None
        if M.table is not None:
            fa = M.table.graph_a.areas[i].features
            fb = M.table.graph_b.areas[j].features
            n, m = M.table.passage_argmin[i, j]
            if n >= 0:
                seg_a, seg_b, kind = fa.passage_segments[n], fb.passage_segments[m], SegmentKind.PASSAGE_DISTANCE
            else:
                seg_a, seg_b, kind = fa.hull_segment, fb.hull_segment, SegmentKind.HULL_LONGEST
        pairs.append(MatchPair(M.ids_a[i], M.ids_b[j], float(M.values[i, j]), seg_a, seg_b, kind))
    pairs.sort(key=lambda p: (p.total_cost, p.area_id_a, p.area_id_b))
    return pairs


# ---------------------------------------------------------------------------
# weight sweep
# ---------------------------------------------------------------------------


def simplex_lattice(step: float = 0.01) -> list[WeightVector]:
    """All weight vectors on the probability simplex with spacing ``step``.

    Ordered by w_a, then w_p, ascending.
    """
    n = round(1.0 / step)
    if n < 1 or abs(n * step - 1.0) > 1e-9:
        raise ConfigError(f"step must divide 1 evenly, got {step}")
    out = []
    for i in range(n + 1):
        for j in range(n + 1 - i):
            out.append(WeightVector(i / n, j / n, (n - i - j) / n))
    return out


@dataclass(frozen=True)
class SweepPoint:
    weights: WeightVector
    correctness: float
    matched_pairs: int
    best_cluster_size: int


def weight_sweep(
    graph_a: AreaGraph,
    graph_b: AreaGraph,
    gt_pairs: Iterable[tuple[int, int]],
    step: float = 0.01,
    config: MatchConfig | None = None,
    lattice: Sequence[WeightVector] | None = None,
) -> list[SweepPoint]:
    """Run matching and rotation voting for every lattice weight vector.

    Correctness is the fraction of ground-truth area pairs present in the best
    rotation cluster. Transform selection is skipped since the score does not
    depend on it.
    """
    from .transform_estimation import MatchConfig, best_cluster, cluster_rotations, pair_hypotheses, order_hypotheses

    config = config or MatchConfig()
    gt = {(int(a), int(b)) for a, b in gt_pairs}
    if not gt:
        raise ConfigError("ground-truth pair list is empty")
    table = FeatureCostTable.build(graph_a, graph_b)
    cache: dict[tuple[int, int], list] = {}
    out = []
    for w in lattice if lattice is not None else simplex_lattice(step):
        pairs = mutual_knn_pairs(cost_matrix(graph_a, graph_b, w, table), config.k)
        hyps = []
        for p in pairs:
            key = (p.area_id_a, p.area_id_b)
            if key not in cache:
                cache[key] = pair_hypotheses(
                    p, graph_a.by_id(p.area_id_a), graph_b.by_id(p.area_id_b), config.overlap_threshold
                )
            # total_cost differs per w; rebind so ordering follows this run's pairs
            hyps.extend(h.with_pair(p) for h in cache[key])
        hyps = order_hypotheses(hyps, config.seed)
        if not hyps:
            out.append(SweepPoint(w, 0.0, len(pairs), 0))
            continue
        best = best_cluster(cluster_rotations(hyps, math.radians(config.angle_threshold_deg)))
        found = {(h.pair.area_id_a, h.pair.area_id_b) for h in best.members}
        out.append(SweepPoint(w, len(found & gt) / len(gt), len(pairs), len(best.members)))
    return out


def sweep_to_csv(points: Sequence[SweepPoint]) -> str:
    lines = ["w_a,w_p,w_l,correctness,matched_pairs,best_cluster_size"]
    for p in points:
        w = p.weights
        lines.append(f"{w.w_a:.6g},{w.w_p:.6g},{w.w_l:.6g},{p.correctness:.6g},{p.matched_pairs},{p.best_cluster_size}")
    return "\n".join(lines) + "\n"
