import json
import math

import numpy as np
import pytest
from PIL import Image
from scipy import ndimage

from areamatch.errors import ConfigError, FormatError, IoError
from areamatch.evaluation import SyntheticSpec, generate_synthetic_pair
from areamatch.geometry import Point2, Polygon2, RigidTransform2D
from areamatch.map_io import (
    Cell,
    GridMap,
    area_graph_from_dict,
    dumps_area_graph,
    grid_from_image,
    load_grid_map,
    read_area_graph,
    render_alignment,
    save_grid_map,
    warp_occupancy,
    write_area_graph,
)
from areamatch.segmentation import Area, AreaGraph


def _write(tmp_path, name, arr, mode="L"):
    path = tmp_path / name
    Image.fromarray(arr, mode=mode).save(path)
    return path


def test_all_white_is_free(tmp_path):
    g = load_grid_map(_write(tmp_path, "w.pgm", np.full((4, 6), 255, np.uint8)), 0.05)
    assert g.free.all() and g.cells.shape == (4, 6)


def test_all_black_is_occupied(tmp_path):
    g = load_grid_map(_write(tmp_path, "b.png", np.zeros((3, 3), np.uint8)), 0.1)
    assert g.occupied.all()


def test_checkerboard_and_unknown_band():
    img = np.array([[0, 255], [205, 50]], dtype=np.uint8)
    g = grid_from_image(img, 1.0)
    # row 0 of the grid is the bottom image row
    assert g.cells.tolist() == [[Cell.UNKNOWN, Cell.OCCUPIED], [Cell.OCCUPIED, Cell.FREE]]


def test_thresholds_are_configurable():
    img = np.array([[200]], dtype=np.uint8)
    assert grid_from_image(img, 1.0).cells[0, 0] == Cell.UNKNOWN
    assert grid_from_image(img, 1.0, free_threshold=200).cells[0, 0] == Cell.FREE


@pytest.mark.parametrize("res,free,occ", [(0.0, 250, 50), (-1, 250, 50), (0.05, 40, 50), (0.05, 256, 50)])
def test_bad_config(tmp_path, res, free, occ):
    path = _write(tmp_path, "w.pgm", np.full((2, 2), 255, np.uint8))
    with pytest.raises(ConfigError):
        load_grid_map(path, res, free, occ)


def test_rgb_rejected(tmp_path):
    path = _write(tmp_path, "c.png", np.zeros((2, 2, 3), np.uint8), mode="RGB")
    with pytest.raises(FormatError):
        load_grid_map(path, 0.05)


def test_missing_and_garbage_files(tmp_path):
    with pytest.raises(IoError):
        load_grid_map(tmp_path / "none.pgm", 0.05)
    junk = tmp_path / "junk.pgm"
    junk.write_bytes(b"not an image")
    with pytest.raises(IoError):
        load_grid_map(junk, 0.05)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    g = GridMap(rng.integers(0, 3, size=(7, 9)).astype(np.uint8), 0.05)
    save_grid_map(g, tmp_path / "g.pgm")
    assert np.array_equal(load_grid_map(tmp_path / "g.pgm", 0.05).cells, g.cells)


def test_cell_world_conversion():
    g = GridMap(np.zeros((10, 20), np.uint8), 0.5, Point2(1.0, -2.0))
    w = g.cell_to_world(np.array([3]), np.array([7]))
    assert np.allclose(w, [[1.0 + 7.5 * 0.5, -2.0 + 3.5 * 0.5]])
    r, c = g.world_to_cell(w)
    assert (r[0], c[0]) == (3, 7)


def test_gridmap_rejects_bad_cells():
    with pytest.raises(ValueError):
        GridMap(np.full((2, 2), 7, np.uint8), 0.1)


def _graph(n_areas=2):
    areas = []
    for i in range(n_areas):
        x0 = 3.0 * i
        poly = Polygon2([(x0, 0), (x0 + 3, 0), (x0 + 3, 2), (x0, 2)])
        passages = []
        if i > 0:
            passages.append(Point2(x0, 1.0))
        if i < n_areas - 1:
            passages.append(Point2(x0 + 3, 1.0))
        areas.append(Area(i, poly, tuple(passages)))
    return AreaGraph.from_areas(areas, resolution=0.05, source="unit")


def test_area_graph_round_trip(tmp_path):
    g = _graph(50)
    write_area_graph(g, tmp_path / "g.areagraph")
    back = read_area_graph(tmp_path / "g.areagraph")
    assert back == g
    assert dumps_area_graph(back) == dumps_area_graph(g)
    assert len(g.adjacency) == 49


def test_round_trip_keeps_awkward_floats(tmp_path):
    poly = Polygon2([(0.1, 0.2), (1 / 3, 0.2), (1 / 3, math.pi)])
    g = AreaGraph.from_areas([Area(0, poly, ())], resolution=0.05)
    write_area_graph(g, tmp_path / "g.json")
    assert np.array_equal(read_area_graph(tmp_path / "g.json").areas[0].polygon.vertices, poly.vertices)


def test_schema_error_has_pointer():
    doc = json.loads(dumps_area_graph(_graph()))
    doc["areas"][1]["polygon"][2] = [1.0]
    with pytest.raises(FormatError) as ei:
        area_graph_from_dict(doc)
    assert ei.value.location == "/areas/1/polygon/2"


def test_wrong_version():
    doc = json.loads(dumps_area_graph(_graph()))
    doc["version"] = 2
    with pytest.raises(FormatError):
        area_graph_from_dict(doc)


def test_duplicate_ids():
    doc = json.loads(dumps_area_graph(_graph()))
    doc["areas"][1]["id"] = 0
    with pytest.raises(FormatError, match="duplicate"):
        area_graph_from_dict(doc)


def test_far_passage_rejected():
    doc = json.loads(dumps_area_graph(_graph()))
    doc["areas"][0]["passages"] = [[1.5, 1.0]]
    with pytest.raises(FormatError) as ei:
        area_graph_from_dict(doc)
    assert ei.value.location == "/areas/0/passages/0"


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.areagraph"
    p.write_text("{", encoding="utf-8")
    with pytest.raises(FormatError):
        read_area_graph(p)


def test_render_identity_coincides(tmp_path, rooms):
    img = render_alignment(rooms, rooms, RigidTransform2D.identity(), tmp_path / "r.png")
    occ = rooms.occupied[::-1]
    # every occupied pixel is the grey+red blend, every free pixel stays white
    assert (img[occ] == (192, 64, 64)).all()
    assert (img[~occ] == 255).all()
    assert Image.open(tmp_path / "r.png").size == (rooms.width, rooms.height)


def test_render_quarter_turn_coincidence():
    gt = RigidTransform2D(math.pi / 2, 1.0, 2.0)
    a, b, gt = generate_synthetic_pair(SyntheticSpec(room_grid=(1, 3), seed=2, resolution=0.1, gt_transform=gt))
    warped = warp_occupancy(a, gt, b)
    near_b = ndimage.binary_dilation(b.occupied, structure=np.ones((3, 3), bool))
    assert warped.sum() > 0
    assert (warped & near_b).sum() / warped.sum() >= 0.99


def test_render_disjoint_maps(tmp_path):
    ca = np.zeros((10, 10), np.uint8)
    cb = np.zeros((10, 10), np.uint8)
    ca[1:3, 1:3] = Cell.OCCUPIED
    cb[6:9, 6:9] = Cell.OCCUPIED
    img = render_alignment(GridMap(ca, 0.1), GridMap(cb, 0.1), RigidTransform2D.identity(), tmp_path / "r.png")
    px = img.reshape(-1, 3).tolist()
    assert px.count([128, 128, 128]) == 9
    assert px.count([255, 128, 128]) == 4
    assert [192, 64, 64] not in px
