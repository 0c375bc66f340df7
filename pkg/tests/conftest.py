import math

import numpy as np
import pytest

from areamatch.evaluation import SyntheticSpec, generate_synthetic_pair
from areamatch.geometry import RigidTransform2D
from areamatch.map_io import Cell, GridMap
from areamatch.segmentation import segment_grid_map


def rooms_grid(res=0.1, door=1.0):
    """Two 5 m x 5 m rooms side by side, 0.3 m wall, one door centred in the wall."""
    w = 0.3
    nx = int(round((5 + w + 5 + 2 * w) / res))
    ny = int(round((5 + 2 * w) / res))
    cells = np.full((ny, nx), Cell.OCCUPIED, dtype=np.uint8)
    xs = (np.arange(nx) + 0.5) * res
    ys = (np.arange(ny) + 0.5) * res
    X, Y = np.meshgrid(xs, ys)
    room1 = (X > w) & (X < w + 5) & (Y > w) & (Y < w + 5)
    room2 = (X > 2 * w + 5) & (X < 2 * w + 10) & (Y > w) & (Y < w + 5)
    gap = (X >= w + 5) & (X <= 2 * w + 5) & (np.abs(Y - (w + 2.5)) < door / 2)
    cells[room1 | room2 | gap] = Cell.FREE
    return GridMap(cells, res)


def single_room_grid(res=0.1, size=4.0):
    n = int(round((size + 0.6) / res))
    cells = np.full((n, n), Cell.OCCUPIED, dtype=np.uint8)
    k = int(round(0.3 / res))
    cells[k:-k, k:-k] = Cell.FREE
    return GridMap(cells, res)


@pytest.fixture(scope="session")
def synth_pair():
    gt = RigidTransform2D(math.radians(45), 3.0, -2.0)
    return generate_synthetic_pair(SyntheticSpec(room_grid=(2, 4), seed=7, gt_transform=gt, dropout=0.02))


@pytest.fixture(scope="session")
def synth_graph():
    _, b, _ = generate_synthetic_pair(SyntheticSpec(seed=1))
    return segment_grid_map(b)


@pytest.fixture(scope="session")
def rooms():
    return rooms_grid()
