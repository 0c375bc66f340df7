"""Align two 2D maps by segmenting free space into areas and matching the areas."""

from .errors import (
    AreaMatchError,
    ConfigError,
    DegeneratePolygon,
    DomainError,
    EmptyGraphError,
    EmptyMapError,
    FormatError,
    IoError,
    MatchFailed,
    NoHypothesesError,
    SingleAreaWarning,
)
from .geometry import Point2, Polygon2, RigidTransform2D, Segment2
from .map_io import Cell, GridMap, load_grid_map, read_area_graph, write_area_graph
from .segmentation import Area, AreaGraph, segment_grid_map
from .matching import WeightVector, cost_matrix, mutual_knn_pairs
from .transform_estimation import MatchConfig, MatchResult, match_maps

__version__ = "0.1.0"

__all__ = [
    "AreaMatchError", "ConfigError", "DegeneratePolygon", "DomainError", "EmptyGraphError", "EmptyMapError",
    "FormatError", "IoError", "MatchFailed", "NoHypothesesError", "SingleAreaWarning",
    "Point2", "Polygon2", "RigidTransform2D", "Segment2",
    "Cell", "GridMap", "load_grid_map", "read_area_graph", "write_area_graph",
    "Area", "AreaGraph", "segment_grid_map",
    "WeightVector", "cost_matrix", "mutual_knn_pairs",
    "MatchConfig", "MatchResult", "match_maps",
]
