"""Rotation hypotheses from matched areas, rotation voting, and transform selection."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np
import shapely

from .errors import ConfigError, MatchFailed, NoHypothesesError
from .geometry import (
    Point2,
    RigidTransform2D,
    apply_rigid,
    circular_distance,
    circular_mean,
    polygon_overlap_area,
    rotation_candidates,
    transform_from_match,
)
from .map_io import GridMap
from .matching import DEFAULT_K, FeatureCostTable, MatchPair, WeightVector, cost_matrix, mutual_knn_pairs
from .segmentation import DEFAULT_WIDTH, Area, AreaGraph, segment_grid_map

DEFAULT_ANGLE_THRESHOLD_DEG = 3.0
DEFAULT_OVERLAP_THRESHOLD = 0.7
MAX_CLUSTER_PASSES = 20
SCORE_SCOPES = ("all", "cluster")


@dataclass(frozen=True)
class MatchConfig:
    width: float = DEFAULT_WIDTH
    k: int = DEFAULT_K
    weights: WeightVector = field(default_factory=WeightVector)
    angle_threshold_deg: float = DEFAULT_ANGLE_THRESHOLD_DEG
    overlap_threshold: float = DEFAULT_OVERLAP_THRESHOLD
    seed: int | None = None
    # which pairs the final overlap sum runs over: every mutual pair, or only best-cluster pairs
    score_scope: str = "all"

    def __post_init__(self) -> None:
        if not self.width > 0:
            raise ConfigError(f"width must be positive, got {self.width}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if not 0 < self.angle_threshold_deg < 180:
            raise ConfigError(f"angle threshold must lie in (0, 180) degrees, got {self.angle_threshold_deg}")
        if not 0 <= self.overlap_threshold <= 1:
            raise ConfigError(f"overlap threshold must lie in [0, 1], got {self.overlap_threshold}")
        if self.score_scope not in SCORE_SCOPES:
            raise ConfigError(f"score scope must be one of {SCORE_SCOPES}, got {self.score_scope!r}")


@dataclass(frozen=True)
class RotationHypothesis:
    alpha: float
    center_a: Point2
    center_b: Point2
    pair: MatchPair
    pair_overlap: float

    @property
    def transform(self) -> RigidTransform2D:
        return transform_from_match(self.alpha, self.center_a, self.center_b)

    def with_pair(self, pair: MatchPair) -> RotationHypothesis:
        return replace(self, pair=pair)


@dataclass
class RotationCluster:
    center: float
    members: list[RotationHypothesis]

    @property
    def overlap_sum(self) -> float:
        return sum(h.pair_overlap for h in self.members)

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class MatchResult:
    transform: RigidTransform2D
    overlap_sum: float
    best_cluster_size: int
    matched_pairs: list[MatchPair]
    timings: dict[str, float] = field(default_factory=dict)
    best_sample: RotationHypothesis | None = None
    n_hypotheses: int = 0
    n_clusters: int = 0

    def to_dict(self, include_timings: bool = True) -> dict:
        d = {
            "theta_rad": self.transform.theta,
            "theta_deg": math.degrees(self.transform.theta),
            "t": [self.transform.tx, self.transform.ty],
            "overlap_sum": self.overlap_sum,
            "best_cluster_size": self.best_cluster_size,
            "matched_pairs": len(self.matched_pairs),
            "hypotheses": self.n_hypotheses,
            "clusters": self.n_clusters,
        }
        if include_timings:
            d["timings"] = dict(self.timings)
        return d


def overlap_percentage(area_a: Area, area_b: Area, T: RigidTransform2D) -> float:
    """Intersection of ``T(area_a)`` with ``area_b`` over the smaller of the two areas."""
    moved = apply_rigid(T, area_a.polygon)
    op = polygon_overlap_area(moved, area_b.polygon) / min(area_a.polygon.area, area_b.polygon.area)
    return min(max(op, 0.0), 1.0)


def pair_hypotheses(
    pair: MatchPair, area_a: Area, area_b: Area, overlap_threshold: float = DEFAULT_OVERLAP_THRESHOLD
) -> list[RotationHypothesis]:
    """Both undirected-segment rotation candidates of a pair that pass overlap verification."""
    if pair.segment_a is None or pair.segment_b is None:
        raise ValueError("match pair carries no segments")
    ca, cb = pair.segment_a.midpoint, pair.segment_b.midpoint
    out = []
    for alpha in rotation_candidates(pair.segment_a, pair.segment_b):
        op = overlap_percentage(area_a, area_b, transform_from_match(alpha, ca, cb))
        if op >= overlap_threshold:
            out.append(RotationHypothesis(alpha, ca, cb, pair, op))
    return out


def order_hypotheses(hyps: Sequence[RotationHypothesis], seed: int | None = None) -> list[RotationHypothesis]:
    """Cheapest pair first; a seed applies a reproducible random permutation instead."""
    hyps = sorted(hyps, key=lambda h: (h.pair.total_cost, h.pair.area_id_a, h.pair.area_id_b))
    if seed is None:
        return hyps
    perm = np.random.default_rng(seed).permutation(len(hyps))
    return [hyps[i] for i in perm]


def _nearest(alpha: float, centers: Sequence[float]) -> tuple[int, float]:
    best, best_d = -1, math.inf
    for idx, c in enumerate(centers):
        d = circular_distance(alpha, c)
        if d < best_d:
            best, best_d = idx, d
    return best, best_d


def cluster_rotations(
    hyps: Sequence[RotationHypothesis | float],
    angle_threshold: float = math.radians(DEFAULT_ANGLE_THRESHOLD_DEG),
    max_passes: int = MAX_CLUSTER_PASSES,
) -> list[RotationCluster]:
    """Greedy leader clustering of rotation angles, in list order, then refinement.

    A hypothesis farther than ``angle_threshold`` from every centre starts a new
    cluster; otherwise it joins the nearest centre, which moves to the circular
    mean of its members. Refinement passes then reassign every hypothesis to its
    nearest centre (splitting off any that are out of reach) until nothing
    changes or ``max_passes`` is reached. A final sweep evicts members still
    out of reach into singletons, so each member ends within the threshold of
    its cluster centre.

    Plain floats are accepted for convenience and wrapped as bare hypotheses.
    """
    if len(hyps) == 0:
        raise NoHypothesesError("no rotation hypotheses to cluster")
    items = [h if isinstance(h, RotationHypothesis) else _bare(h) for h in hyps]

    centers: list[float] = []
    members: list[list[int]] = []
    for idx, h in enumerate(items):
        near, d = _nearest(h.alpha, centers)
        if near < 0 or d > angle_threshold:
            centers.append(h.alpha)
            members.append([idx])
        else:
            members[near].append(idx)
            centers[near] = circular_mean(items[m].alpha for m in members[near])

    for _ in range(max_passes):
        new_members: list[list[int]] = [[] for _ in centers]
        new_centers = list(centers)
        for idx, h in enumerate(items):
            near, d = _nearest(h.alpha, new_centers)
            if d > angle_threshold:
                new_centers.append(h.alpha)
                new_members.append([idx])
            else:
                new_members[near].append(idx)
        keep = [i for i, m in enumerate(new_members) if m]
        new_members = [new_members[i] for i in keep]
        new_centers = [circular_mean(items[m].alpha for m in ms) for ms in new_members]
        changed = new_members != members
        centers, members = new_centers, new_members
        if not changed:
            break

    # guarantee the radius invariant even if refinement did not settle
    i = 0
    while i < len(members):
        far = [m for m in members[i] if circular_distance(items[m].alpha, centers[i]) > angle_threshold]
        if far:
            worst = max(far, key=lambda m: (circular_distance(items[m].alpha, centers[i]), -m))
            members[i].remove(worst)
            centers[i] = circular_mean(items[m].alpha for m in members[i])
            members.append([worst])
            centers.append(items[worst].alpha)
            continue
        i += 1

    return [RotationCluster(c, [items[m] for m in ms]) for c, ms in zip(centers, members)]


def _bare(alpha: float) -> RotationHypothesis:
    origin = Point2(0.0, 0.0)
    return RotationHypothesis(float(alpha), origin, origin, MatchPair(-1, -1, 0.0), 1.0)


def best_cluster(clusters: Sequence[RotationCluster]) -> RotationCluster:
    """Most members; ties by larger summed pair overlap, then earlier cluster."""
    if not clusters:
        raise NoHypothesesError("no clusters")
    best_idx = 0
    for idx, c in enumerate(clusters):
        b = clusters[best_idx]
        if (len(c), c.overlap_sum) > (len(b), b.overlap_sum):
            best_idx = idx
    return clusters[best_idx]


class _OverlapScorer:
    """Vectorised overlap-percentage sums of a fixed pair list under many transforms."""

    def __init__(self, pairs: Sequence[MatchPair], graph_a: AreaGraph, graph_b: AreaGraph):
        self.pairs = list(pairs)
        ids_a = sorted({p.area_id_a for p in self.pairs})
        slot = {aid: s for s, aid in enumerate(ids_a)}
        self.shapes_a = np.array([graph_a.by_id(a).polygon.shape for a in ids_a], dtype=object)
        self.slot_a = np.array([slot[p.area_id_a] for p in self.pairs], dtype=np.int64)
        self.shapes_b = np.array([graph_b.by_id(p.area_id_b).polygon.shape for p in self.pairs], dtype=object)
        areas_a = np.array([graph_a.by_id(p.area_id_a).polygon.area for p in self.pairs])
        areas_b = np.array([graph_b.by_id(p.area_id_b).polygon.area for p in self.pairs])
        self.min_area = np.minimum(areas_a, areas_b)
        self.bounds_b = shapely.bounds(self.shapes_b)

    def percentages(self, T: RigidTransform2D) -> np.ndarray:
        moved = shapely.transform(self.shapes_a, T.apply)[self.slot_a]
        ba = shapely.bounds(moved)
        bb = self.bounds_b
        touch = (ba[:, 0] <= bb[:, 2]) & (bb[:, 0] <= ba[:, 2]) & (ba[:, 1] <= bb[:, 3]) & (bb[:, 1] <= ba[:, 3])
        op = np.zeros(len(self.pairs))
        if touch.any():
            inter = shapely.area(shapely.intersection(moved[touch], self.shapes_b[touch]))
            op[touch] = np.clip(inter / self.min_area[touch], 0.0, 1.0)
        return op

    def score(self, T: RigidTransform2D) -> float:
        return float(self.percentages(T).sum()) if self.pairs else 0.0


def score_transform(T: RigidTransform2D, pairs: Sequence[MatchPair], graph_a: AreaGraph, graph_b: AreaGraph) -> float:
    """Sum of overlap percentages of all ``pairs`` after moving map A by ``T``."""
    return _OverlapScorer(pairs, graph_a, graph_b).score(T)


def select_best_transform(
    cluster: RotationCluster,
    pairs: Sequence[MatchPair],
    graph_a: AreaGraph,
    graph_b: AreaGraph,
    score_scope: str = "all",
) -> MatchResult:
    """Score every sample of the cluster by the overlap sum over the matched pairs; keep the best.

    With ``score_scope="cluster"`` only the pairs that voted into ``cluster``
    are scored. Ties keep the earliest sample.
    """
    if not cluster.members:
        raise NoHypothesesError("cluster has no samples")
    if score_scope == "cluster":
        seen = set()
        scored = []
        for h in cluster.members:
            key = (h.pair.area_id_a, h.pair.area_id_b)
            if key not in seen:
                seen.add(key)
                scored.append(h.pair)
    else:
        scored = list(pairs)
    scorer = _OverlapScorer(scored, graph_a, graph_b)
    best_h, best_s = None, -math.inf
    for h in cluster.members:
        s = scorer.score(h.transform)
        if s > best_s:
            best_h, best_s = h, s
    assert best_h is not None
    return MatchResult(best_h.transform, best_s, len(cluster.members), list(pairs), best_sample=best_h)


MapInput = Union[GridMap, AreaGraph]


def _as_graph(m: MapInput, width: float) -> AreaGraph:
    if isinstance(m, AreaGraph):
        return m
    if isinstance(m, GridMap):
        return segment_grid_map(m, width)
    raise TypeError(f"expected GridMap or AreaGraph, got {type(m).__name__}")


def match_maps(map_a: MapInput, map_b: MapInput, config: MatchConfig | None = None) -> MatchResult:
    """Estimate the rigid transform taking map A's frame onto map B's.

    Grid maps are segmented first (``segmentation_s``); pre-segmented area graphs
    skip that phase. ``matching_s`` covers features, costs, mutual matching,
    hypotheses, voting and transform selection.
    """
    config = config or MatchConfig()
    t0 = time.perf_counter()
    seg_s = 0.0
    graphs = []
    for m in (map_a, map_b):
        ts = time.perf_counter()
        graphs.append(_as_graph(m, config.width))
        if isinstance(m, GridMap):
            seg_s += time.perf_counter() - ts
    graph_a, graph_b = graphs
    t1 = time.perf_counter()

    diag: dict[str, int] = {"areas_a": len(graph_a), "areas_b": len(graph_b)}
    table = FeatureCostTable.build(graph_a, graph_b)
    pairs = mutual_knn_pairs(cost_matrix(graph_a, graph_b, config.weights, table), config.k)
    diag["matched_pairs"] = len(pairs)
    hyps = []
    for p in pairs:
        hyps.extend(pair_hypotheses(p, graph_a.by_id(p.area_id_a), graph_b.by_id(p.area_id_b), config.overlap_threshold))
    diag["hypotheses"] = len(hyps)
    if not hyps:
        raise MatchFailed("no matched pair passed overlap verification", diag)
    hyps = order_hypotheses(hyps, config.seed)
    clusters = cluster_rotations(hyps, math.radians(config.angle_threshold_deg))
    best = best_cluster(clusters)
    result = select_best_transform(best, pairs, graph_a, graph_b, config.score_scope)
    t2 = time.perf_counter()

    result.n_hypotheses = len(hyps)
    result.n_clusters = len(clusters)
    result.timings = {"segmentation_s": seg_s, "matching_s": t2 - t1, "total_s": t2 - t0}
    return result
