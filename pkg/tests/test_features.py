import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from areamatch.errors import DomainError
from areamatch.features import (
    FeatureCostVector,
    area_size_cost,
    extract_features,
    feature_cost_vector,
    hull_longest_cost,
    passage_distance_cost,
    passage_distance_match,
)
from areamatch.geometry import Point2, Polygon2, RigidTransform2D, apply_rigid
from areamatch.segmentation import Area

from oracles import area_cost, hull_cost, passage_cost

pos = st.floats(1e-3, 1e4, allow_nan=False)
pos_lists = st.lists(pos, min_size=1, max_size=8)
scales = st.floats(1e-2, 1e2)

SQUARE = Polygon2([(0, 0), (6, 0), (6, 6), (0, 6)])


def _area(passages, poly=SQUARE, area_id=0):
    return Area(area_id, poly, tuple(Point2(*p) for p in passages))


def test_area_cost_examples():
    assert area_size_cost(4, 9) == pytest.approx(1 / 3)
    assert area_size_cost(7, 7) == 0.0


def test_passage_cost_examples():
    assert passage_distance_cost([3, 5], [5.5]) == pytest.approx(0.5 / 5.5)
    assert passage_distance_cost([4], [4]) == 0.0
    assert passage_distance_cost([], [3]) is None
    assert passage_distance_match([3, 5], [5.5]) == (pytest.approx(0.5 / 5.5), 1, 0)


def test_hull_cost_examples():
    assert hull_longest_cost(3, 4) == pytest.approx(0.25)
    assert hull_longest_cost(5, 5) == 0.0


@pytest.mark.parametrize("fn", [area_size_cost, hull_longest_cost])
@pytest.mark.parametrize("a,b", [(0, 1), (1, 0), (-2, 3)])
def test_nonpositive_inputs(fn, a, b):
    with pytest.raises(DomainError):
        fn(a, b)


def test_features_two_passages():
    f = extract_features(_area([(0, 1), (0, 4)]))
    assert f.passage_distances == (3.0,)
    assert f.area_size == 36.0
    assert f.hull_longest == pytest.approx(6 * math.sqrt(2))


def test_features_one_passage():
    f = extract_features(_area([(0, 1)]))
    assert f.passage_distances == () and not f.has_passage_distances


def test_features_four_passages():
    corridor = Polygon2([(0, 0), (20, 0), (20, 2), (0, 2)])
    f = extract_features(_area([(0, 1), (5, 0), (12, 2), (20, 1)], corridor))
    assert len(f.passage_distances) == 6
    assert list(f.passage_distances) == sorted(f.passage_distances)
    assert max(f.passage_distances) <= f.hull_longest + 1e-6


def test_features_order_independent():
    pts = [(0, 1), (6, 3), (2, 6)]
    assert extract_features(_area(pts)) == extract_features(_area(pts[::-1]))


def test_feature_rule():
    two = extract_features(_area([(0, 1), (0, 4)]))
    one = extract_features(_area([(0, 1)]))
    three = extract_features(_area([(0, 1), (0, 4), (6, 2)]))
    v = feature_cost_vector(two, three)
    assert v.passage is not None and v.hull is None
    v = feature_cost_vector(one, three)
    assert v.passage is None and v.hull is not None
    assert feature_cost_vector(two, two) == FeatureCostVector(0.0, 0.0, None)


@given(pos, pos)
def test_area_cost_oracle(a, b):
    assert area_size_cost(a, b) == pytest.approx(area_cost(a, b), abs=1e-12)
    assert area_size_cost(a, b) == area_size_cost(b, a)
    assert 0 <= area_size_cost(a, b) < 1


@given(pos_lists, pos_lists)
def test_passage_cost_oracle(x, y):
    x, y = sorted(x), sorted(y)
    assert passage_distance_cost(x, y) == pytest.approx(passage_cost(x, y), abs=1e-12)
    assert passage_distance_cost(x, y) == pytest.approx(passage_distance_cost(y, x), abs=1e-15)
    assert passage_distance_cost(x, x) == 0.0


@given(pos, pos)
def test_hull_cost_oracle(a, b):
    assert hull_longest_cost(a, b) == pytest.approx(hull_cost(a, b), abs=1e-12)
    assert 0 <= hull_longest_cost(a, b) < 1


@given(pos, pos, pos_lists, pos_lists, scales)
def test_scale_invariance(a, b, x, y, s):
    assert area_size_cost(s * s * a, s * s * b) == pytest.approx(area_size_cost(a, b), abs=1e-12)
    assert hull_longest_cost(s * a, s * b) == pytest.approx(hull_longest_cost(a, b), abs=1e-12)
    xs, ys = [s * v for v in x], [s * v for v in y]
    assert passage_distance_cost(xs, ys) == pytest.approx(passage_distance_cost(x, y), abs=1e-12)


@given(st.floats(-math.pi, math.pi), st.floats(-50, 50), st.floats(-50, 50))
def test_features_rigid_invariant(theta, tx, ty):
    T = RigidTransform2D(theta, tx, ty)
    poly = Polygon2([(0, 0), (5, 0), (5, 2), (2, 2), (2, 4), (0, 4)])
    passages = [(5, 1), (1, 4), (0, 2)]
    a = _area(passages, poly)
    b = Area(0, apply_rigid(T, poly), tuple(apply_rigid(T, Point2(*p)) for p in passages))
    fa, fb = extract_features(a), extract_features(b)
    assert fb.area_size == pytest.approx(fa.area_size, abs=1e-6)
    assert fb.hull_longest == pytest.approx(fa.hull_longest, abs=1e-6)
    assert np.allclose(fb.passage_distances, fa.passage_distances, atol=1e-6)
