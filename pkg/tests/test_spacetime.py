import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from summoning import catalog
from summoning.spacetime import Diamond, Geometry, GeometryError, Point, graph_from_geometry, precedes

coord = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
points2 = st.builds(lambda t, x, y: Point(t, (x, y)), coord, coord, coord)


def test_timelike_lightlike_and_spacelike():
    o = Point(0, (0.0,))
    assert precedes(o, Point(2, (1.0,)))
    assert precedes(o, Point(1, (1.0,)))  # lightlike counts
    assert not precedes(o, Point(1, (1.5,)))
    assert not precedes(Point(1, (0.0,)), o)


def test_speed_scales_the_cone():
    o = Point(0, (0.0,))
    far = Point(1, (3.0,))
    assert not precedes(o, far)
    assert precedes(o, far, speed=3.0)


def test_dimension_mismatch_is_rejected():
    with pytest.raises(GeometryError):
        precedes(Point(0, (0.0,)), Point(1, (0.0, 0.0)))


def test_point_validation():
    with pytest.raises(GeometryError):
        Point.of([1.0])
    with pytest.raises(GeometryError):
        Point(math.nan, (0.0,))
    assert Point.of([1, 2, 3]).as_list() == [1.0, 2.0, 3.0]


@settings(max_examples=50, deadline=None)
@given(points2)
def test_reflexive(p):
    assert precedes(p, p)


@settings(max_examples=50, deadline=None)
@given(points2, points2)
def test_antisymmetric_up_to_equality(p, q):
    if precedes(p, q) and precedes(q, p):
        assert abs(p.t - q.t) < 1e-6 and math.dist(p.x, q.x) < 1e-6


@settings(max_examples=50, deadline=None)
@given(points2, st.floats(0, 5), st.floats(0, 5), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_transitive_along_constructed_chains(p, d1, d2, a1, a2):
    # q sits on or inside the cone of p, r on or inside the cone of q
    q = Point(p.t + d1, (p.x[0] + 0.99 * d1 * math.cos(a1), p.x[1] + 0.99 * d1 * math.sin(a1)))
    r = Point(q.t + d2, (q.x[0] + 0.99 * d2 * math.cos(a2), q.x[1] + 0.99 * d2 * math.sin(a2)))
    assert precedes(p, q) and precedes(q, r) and precedes(p, r)


@settings(max_examples=50, deadline=None)
@given(points2, points2, coord, coord, coord, st.floats(0, 2 * math.pi))
def test_invariant_under_translation_and_rotation(p, q, dt, dx, dy, theta):
    def move(a):
        x, y = a.x
        c, s = math.cos(theta), math.sin(theta)
        return Point(a.t + dt, (c * x - s * y + dx, s * x + c * y + dy))

    # stay away from the light cone boundary, where float error decides
    gap = (q.t - p.t) - math.dist(p.x, q.x)
    if abs(gap) > 1e-6:
        assert precedes(p, q) == precedes(move(p), move(q))


def test_triangle_geometry_gives_the_three_cycle():
    g = graph_from_geometry(catalog.triangle_geometry())
    assert g.adj == catalog.THREE_CYCLE.adj


def test_spacelike_diamonds_are_disconnected():
    ds = (Diamond(Point(0, (0.0,)), Point(1, (0.0,))), Diamond(Point(0, (10.0,)), Point(1, (10.0,))))
    g = graph_from_geometry(Geometry(1, ds))
    assert g.edges() == []


def test_stacked_diamonds_are_bidirected():
    ds = (Diamond(Point(0, (0.0,)), Point(5, (0.0,))), Diamond(Point(0, (1.0,)), Point(5, (1.0,))))
    g = graph_from_geometry(Geometry(1, ds))
    assert g.edges() == [(0, 1), (1, 0)]


def test_start_point_flags():
    ds = (Diamond(Point(0, (0.0,)), Point(2, (0.0,))), Diamond(Point(0, (3.0,)), Point(4, (3.0,))))
    late = graph_from_geometry(Geometry(1, ds, start=Point(1, (1.0,))))
    assert not late.start_in_past and late.start_precedes_all_returns
    early = graph_from_geometry(Geometry(1, ds, start=Point(-5, (1.0,))))
    assert early.start_in_past and early.start_precedes_all_returns
    after = graph_from_geometry(Geometry(1, ds, start=Point(3, (0.0,))))
    assert not after.start_precedes_all_returns


def test_call_must_precede_return():
    bad = (Diamond(Point(1, (0.0,)), Point(0, (0.0,)), "X"),)
    with pytest.raises(GeometryError, match="'X'"):
        graph_from_geometry(Geometry(1, bad))


def test_geometry_validation():
    with pytest.raises(GeometryError):
        Geometry(0, ())
    with pytest.raises(GeometryError):
        Geometry(1, (), speed=0)
    with pytest.raises(GeometryError):
        Geometry(2, (Diamond(Point(0, (0.0,)), Point(1, (0.0,))),))
