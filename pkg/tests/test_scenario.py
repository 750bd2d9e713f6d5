import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamsec.scenario import (SPEED_OF_LIGHT, GeometryError, PathSet, Point2D, Reflector, Room,
                              Segment, eve_grid, relative_gain_db, trace_paths)

LAMBDA = SPEED_OF_LIGHT / 60e9


def mirror_wall_room():
    wall = Reflector(Point2D(0, 3), Point2D(6, 3), reflection_loss=6.0)
    return Room(walls=(wall,), bounds=(0.0, 0.0, 6.0, 3.0))


def test_los_only_room():
    room = Room.rectangle(4, 4, reflective=())
    ps = trace_paths(room, Point2D(1, 1), Point2D(3, 2), max_order=0)
    assert len(ps) == 1
    c = ps.components[0]
    assert c.order == 0
    assert c.aod == pytest.approx(math.degrees(math.atan2(1, 2)))
    assert c.aoa == pytest.approx((c.aod + 180.0) % 360.0)


def test_mirror_example():
    ps = trace_paths(mirror_wall_room(), Point2D(1, 1), Point2D(5, 1), max_order=1)
    assert len(ps) == 2
    refl = [c for c in ps if c.order == 1][0]
    assert refl.aod == pytest.approx(45.0)
    assert refl.length == pytest.approx(math.sqrt(32))
    # arrival from the bounce point (3, 3) seen from rx (5, 1)
    assert refl.aoa == pytest.approx(135.0)


def test_gain_is_free_space_times_reflection_loss():
    ps = trace_paths(mirror_wall_room(), Point2D(1, 1), Point2D(5, 1), max_order=1)
    for c in ps:
        d = c.length
        loss = 6.0 * c.order
        expected = LAMBDA / (4 * math.pi * d) * 10 ** (-loss / 20) * np.exp(-2j * math.pi * d / LAMBDA)
        assert abs(c.gain - expected) <= 1e-9 * abs(expected)  # phase argument ~7e3 rad
        assert c.delay == pytest.approx(d / SPEED_OF_LIGHT * 1e9)


def test_blocked_los():
    room = Room(obstacles=(Segment(Point2D(2, 0), Point2D(2, 4)),), bounds=(0, 0, 4, 4))
    assert len(trace_paths(room, Point2D(1, 2), Point2D(3, 2), max_order=0)) == 0


def test_min_gain_drops_weak_components():
    ps = trace_paths(mirror_wall_room(), Point2D(1, 1), Point2D(5, 1), max_order=1)
    los = [c for c in ps if c.order == 0][0]
    cutoff = relative_gain_db(los) - 0.5
    assert len(trace_paths(mirror_wall_room(), Point2D(1, 1), Point2D(5, 1), 1, min_gain=cutoff)) == 1


def test_degenerate_geometry():
    room = Room.rectangle(4, 4)
    with pytest.raises(GeometryError):
        trace_paths(room, Point2D(0, 2), Point2D(2, 2))
    with pytest.raises(GeometryError):
        trace_paths(room, Point2D(1, 1), Point2D(1, 1))
    with pytest.raises(GeometryError):
        trace_paths(room, Point2D(5, 1), Point2D(1, 1))
    with pytest.raises(ValueError):
        trace_paths(room, Point2D(1, 1), Point2D(2, 2), max_order=3)


def test_types_validate():
    with pytest.raises(ValueError):
        Point2D(float("nan"), 0)
    with pytest.raises(ValueError):
        Reflector(Point2D(1, 1), Point2D(1, 1))
    with pytest.raises(ValueError):
        Reflector(Point2D(0, 0), Point2D(1, 1), reflection_loss=-1)


def test_pathset_sorted_by_delay_with_single_los():
    room = Room.rectangle(6, 4)
    ps = trace_paths(room, Point2D(1, 1), Point2D(4, 3), max_order=2)
    delays = [c.delay for c in ps]
    assert delays == sorted(delays)
    assert sum(c.order == 0 for c in ps) == 1
    assert all(0 <= c.aod < 360 and 0 <= c.aoa < 360 for c in ps)


def test_eve_grid_examples():
    room = Room.rectangle(4, 4)
    assert len(eve_grid(room, 2.0, exclusion_radius=0.0)) == 9
    corners = eve_grid(room, 4.0, exclusion_radius=0.0)
    assert [(p.x, p.y) for p in corners] == [(0, 0), (4, 0), (0, 4), (4, 4)]
    pts = eve_grid(room, 2.0, exclude=[Point2D(2, 2)])
    assert len(pts) == 8 and Point2D(2, 2) not in pts
    with pytest.raises(ValueError):
        eve_grid(room, 5.0)


def test_eve_grid_row_major_and_region():
    room = Room.rectangle(8, 6)
    pts = eve_grid(room, 1.5, region=(2.5, 1.5, 5.5, 4.5))
    assert [(p.x, p.y) for p in pts] == [(x, y) for y in (1.5, 3.0, 4.5) for x in (2.5, 4.0, 5.5)]


coord = st.floats(0.2, 5.8, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(coord, st.floats(0.2, 3.8), coord, st.floats(0.2, 3.8))
def test_reciprocity(ax, ay, bx, by):
    a, b = Point2D(ax, ay), Point2D(bx, by)
    if a.distance(b) < 1e-3:
        return
    room = Room.rectangle(6, 4)
    fwd = trace_paths(room, a, b, max_order=2)
    rev = trace_paths(room, b, a, max_order=2)
    assert len(fwd) == len(rev)
    back = {tuple(reversed(c.bounces)): c for c in rev}
    for c in fwd:
        r = back[c.bounces]
        assert r.length == pytest.approx(c.length, abs=1e-9)
        assert r.aod == pytest.approx(c.aoa, abs=1e-7) or abs(abs(r.aod - c.aoa) - 360) < 1e-7
        assert r.aoa == pytest.approx(c.aod, abs=1e-7) or abs(abs(r.aoa - c.aod) - 360) < 1e-7


@settings(max_examples=40, deadline=None)
@given(coord, st.floats(0.2, 3.8), coord, st.floats(0.2, 3.8))
def test_order_monotone_and_first_order_image_bearing(ax, ay, bx, by):
    a, b = Point2D(ax, ay), Point2D(bx, by)
    if a.distance(b) < 1e-3:
        return
    room = Room.rectangle(6, 4)
    sets = [{c.bounces for c in trace_paths(room, a, b, max_order=k)} for k in (0, 1, 2)]
    assert sets[0] <= sets[1] <= sets[2]
    # independent mirror construction for the axis-aligned walls
    images = {"south": (b.x, -b.y), "east": (12 - b.x, b.y), "north": (b.x, 8 - b.y),
              "west": (-b.x, b.y)}
    sides = ("north", "south", "east", "west")
    order_of = dict(enumerate(sides))  # Room.rectangle wall order
    assert set(order_of.values()) == set(sides)
    for c in trace_paths(room, a, b, max_order=1):
        if c.order != 1:
            continue
        ix, iy = images[order_of[c.bounces[0]]]
        bearing = math.degrees(math.atan2(iy - a.y, ix - a.x)) % 360.0
        assert min(abs(c.aod - bearing), 360 - abs(c.aod - bearing)) < 1e-7
        assert c.length == pytest.approx(math.hypot(ix - a.x, iy - a.y))


def test_scaled_pathset():
    ps = trace_paths(mirror_wall_room(), Point2D(1, 1), Point2D(5, 1), max_order=1)
    scaled = ps.scaled(2.0)
    assert np.allclose(scaled.gains, 2 * ps.gains)
    assert isinstance(scaled, PathSet)
