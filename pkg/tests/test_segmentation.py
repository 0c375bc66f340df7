import itertools

import numpy as np
import pytest
import shapely

from areamatch.errors import ConfigError, EmptyMapError, SingleAreaWarning
from areamatch.evaluation import SyntheticSpec, build_floorplan, generate_synthetic_pair
from areamatch.geometry import Point2, Polygon2, polygon_overlap_area
from areamatch.map_io import Cell, GridMap
from areamatch.segmentation import Area, AreaGraph, passages_of, segment_grid_map

from conftest import single_room_grid


def test_two_rooms_with_door(rooms):
    g = segment_grid_map(rooms, 1.8)
    assert 2 <= len(g) <= 3
    door = Point2(0.3 + 5 + 0.15, 0.3 + 2.5)
    all_passages = [p for a in g.areas for p in a.passages]
    assert min(p.distance(door) for p in all_passages) < 0.5
    assert len(g.adjacency) >= 1


def test_single_room_warns():
    with pytest.warns(SingleAreaWarning):
        g = segment_grid_map(single_room_grid())
    assert len(g) == 1
    assert g.areas[0].passages == ()


def test_no_free_space():
    with pytest.raises(EmptyMapError):
        segment_grid_map(GridMap(np.full((5, 5), Cell.OCCUPIED, np.uint8), 0.1))


def test_unknown_is_not_free():
    cells = np.full((40, 40), Cell.UNKNOWN, np.uint8)
    with pytest.raises(EmptyMapError):
        segment_grid_map(GridMap(cells, 0.1))


def test_bad_width(rooms):
    with pytest.raises(ConfigError):
        segment_grid_map(rooms, 0.0)


def test_narrow_free_space_still_seeds():
    # a 1 m wide corridor is never farther than width/2 from a wall
    cells = np.full((20, 100), Cell.OCCUPIED, np.uint8)
    cells[5:15, 5:95] = Cell.FREE
    with pytest.warns(SingleAreaWarning):
        g = segment_grid_map(GridMap(cells, 0.1), 1.8)
    assert len(g) == 1


def test_deterministic(synth_graph):
    _, b, _ = generate_synthetic_pair(SyntheticSpec(seed=1))
    assert segment_grid_map(b) == synth_graph


def test_translation_commutes(rooms):
    k_r, k_c = 7, 4
    cells = np.full((rooms.height + k_r, rooms.width + k_c), Cell.OCCUPIED, np.uint8)
    cells[k_r:, k_c:] = rooms.cells
    moved = segment_grid_map(GridMap(cells, rooms.resolution))
    base = segment_grid_map(rooms)
    dx, dy = k_c * rooms.resolution, k_r * rooms.resolution
    assert len(moved) == len(base)
    for a, b in zip(base.areas, moved.areas):
        assert np.allclose(a.polygon.vertices + (dx, dy), b.polygon.vertices, atol=1e-9)
        assert np.allclose([tuple(p) for p in a.passages], [(p.x - dx, p.y - dy) for p in b.passages], atol=1e-9)


def test_areas_interior_disjoint(synth_graph):
    for a, b in itertools.combinations(synth_graph.areas, 2):
        ov = polygon_overlap_area(a.polygon, b.polygon)
        assert ov / min(a.polygon.area, b.polygon.area) < 0.01


def test_areas_cover_free_space():
    _, b, _ = generate_synthetic_pair(SyntheticSpec(seed=1))
    g = segment_grid_map(b)
    union = shapely.union_all([a.polygon.shape for a in g.areas])
    free_area = b.free.sum() * b.resolution**2
    assert union.area / free_area >= 0.9


def test_area_invariants(synth_graph):
    assert len(synth_graph) > 1
    for a in synth_graph.areas:
        assert a.polygon.area > 0
        assert len(a.passages) >= 1
        for p in a.passages:
            assert a.polygon.shape.exterior.distance(shapely.Point(p.x, p.y)) <= 0.5
    for i, j in synth_graph.adjacency:
        shared = [p for p in synth_graph.areas[i].passages if p in synth_graph.areas[j].passages]
        assert shared


def test_room_count_tracks_layout():
    # stand-in for a hand-counted lab map: the generator knows how many rooms it drew
    for seed, grid in [(0, (2, 6)), (4, (4, 5)), (9, (2, 3))]:
        spec = SyntheticSpec(room_grid=grid, seed=seed)
        plan = build_floorplan(spec, np.random.default_rng(seed))
        expected = grid[0] * grid[1] + plan.n_corridors
        _, b, _ = generate_synthetic_pair(spec)
        n = len(segment_grid_map(b, 1.8))
        assert abs(n - expected) <= 0.3 * expected, (grid, n, expected)


def test_passages_sorted():
    poly = Polygon2([(0, 0), (4, 0), (4, 4), (0, 4)])
    a = Area(0, poly, (Point2(4, 2), Point2(0, 2), Point2(2, 4)))
    assert passages_of(a) == [Point2(0, 2), Point2(2, 4), Point2(4, 2)]


def test_adjacency_from_shared_passages():
    left = Area(0, Polygon2([(0, 0), (2, 0), (2, 2), (0, 2)]), (Point2(2, 1),))
    right = Area(1, Polygon2([(2, 0), (4, 0), (4, 2), (2, 2)]), (Point2(2, 1.0000001),))
    far = Area(2, Polygon2([(9, 0), (10, 0), (10, 1)]), ())
    g = AreaGraph.from_areas([left, right, far], resolution=0.05)
    assert g.adjacency == frozenset({(0, 1)})
