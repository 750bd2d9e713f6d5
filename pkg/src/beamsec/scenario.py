"""2D indoor geometry and specular multipath extraction via the image method."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_CARRIER_HZ = 60e9

_EPS = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate placements (node on a wall, coincident nodes, outside room)."""


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y

    def distance(self, other: "Point2D") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)

    def bearing_to(self, other: "Point2D") -> float:
        """Azimuth of `other` seen from this point, degrees in [0, 360)."""
        return math.degrees(math.atan2(other.y - self.y, other.x - self.x)) % 360.0


@dataclass(frozen=True)
class Segment:
    start: Point2D
    end: Point2D

    def __post_init__(self):
        if self.start.distance(self.end) < _EPS:
            raise ValueError("degenerate segment: endpoints coincide")

    def mirror(self, p: Point2D) -> Point2D:
        ax, ay = self.start
        dx, dy = self.end.x - ax, self.end.y - ay
        t = ((p.x - ax) * dx + (p.y - ay) * dy) / (dx * dx + dy * dy)
        fx, fy = ax + t * dx, ay + t * dy
        return Point2D(2 * fx - p.x, 2 * fy - p.y)

    def distance_to(self, p: Point2D) -> float:
        ax, ay = self.start
        dx, dy = self.end.x - ax, self.end.y - ay
        t = ((p.x - ax) * dx + (p.y - ay) * dy) / (dx * dx + dy * dy)
        t = min(1.0, max(0.0, t))
        return math.hypot(ax + t * dx - p.x, ay + t * dy - p.y)


@dataclass(frozen=True)
class Reflector(Segment):
    reflection_loss: float = 6.0  # dB per bounce

    def __post_init__(self):
        super().__post_init__()
        if not math.isfinite(self.reflection_loss) or self.reflection_loss < 0:
            raise ValueError(f"reflection loss must be finite and >= 0, got {self.reflection_loss}")


@dataclass(frozen=True)
class Room:
    walls: tuple[Reflector, ...] = ()
    obstacles: tuple[Segment, ...] = ()
    bounds: Optional[tuple[float, float, float, float]] = None  # xmin, ymin, xmax, ymax

    def __post_init__(self):
        object.__setattr__(self, "walls", tuple(self.walls))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.bounds is None:
            pts = [p for s in (*self.walls, *self.obstacles) for p in (s.start, s.end)]
            if not pts:
                raise ValueError("room needs explicit bounds when it has no walls or obstacles")
            xs = [p.x for p in pts]
            ys = [p.y for p in pts]
            object.__setattr__(self, "bounds", (min(xs), min(ys), max(xs), max(ys)))
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ValueError(f"empty room bounds {self.bounds}")

    @classmethod
    def rectangle(cls, width: float, height: float, loss_db: float = 6.0,
                  reflective: Sequence[str] = ("north", "south", "east", "west"),
                  obstacles: Iterable[Segment] = ()) -> "Room":
        corners = {
            "south": (Point2D(0, 0), Point2D(width, 0)),
            "east": (Point2D(width, 0), Point2D(width, height)),
            "north": (Point2D(width, height), Point2D(0, height)),
            "west": (Point2D(0, height), Point2D(0, 0)),
        }
        walls = tuple(Reflector(*corners[side], reflection_loss=loss_db) for side in reflective)
        return cls(walls=walls, obstacles=tuple(obstacles), bounds=(0.0, 0.0, width, height))

    def contains(self, p: Point2D) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin - _EPS <= p.x <= xmax + _EPS and ymin - _EPS <= p.y <= ymax + _EPS


@dataclass(frozen=True)
class PathComponent:
    gain: complex
    aod: float  # degrees, global bearing at the transmitter
    aoa: float  # degrees, global bearing from the receiver toward the last interaction point
    delay: float  # ns
    order: int
    length: float = 0.0  # m
    bounces: tuple[int, ...] = ()


@dataclass(frozen=True)
class PathSet:
    components: tuple[PathComponent, ...]
    tx: Point2D
    rx: Point2D

    def __post_init__(self):
        comps = tuple(sorted(self.components, key=lambda c: (c.delay, c.bounces)))
        object.__setattr__(self, "components", comps)
        if sum(1 for c in comps if c.order == 0) > 1:
            raise ValueError("a PathSet holds at most one LoS component")

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    @property
    def gains(self) -> np.ndarray:
        return np.array([c.gain for c in self.components], dtype=complex)

    @property
    def aods(self) -> np.ndarray:
        return np.array([c.aod for c in self.components], dtype=float)

    @property
    def aoas(self) -> np.ndarray:
        return np.array([c.aoa for c in self.components], dtype=float)

    def scaled(self, factor: complex) -> "PathSet":
        comps = tuple(
            PathComponent(c.gain * factor, c.aod, c.aoa, c.delay, c.order, c.length, c.bounces)
            for c in self.components
        )
        return PathSet(comps, self.tx, self.rx)


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _segment_hit(p: Point2D, q: Point2D, seg: Segment) -> Optional[tuple[float, float]]:
    """Intersection parameters (t along p->q, u along seg) or None if parallel/disjoint."""
    rx, ry = q.x - p.x, q.y - p.y
    sx, sy = seg.end.x - seg.start.x, seg.end.y - seg.start.y
    denom = _cross(rx, ry, sx, sy)
    if abs(denom) < 1e-15:
        return None
    wx, wy = seg.start.x - p.x, seg.start.y - p.y
    t = _cross(wx, wy, sx, sy) / denom
    u = _cross(wx, wy, rx, ry) / denom
    if -_EPS <= t <= 1 + _EPS and -_EPS <= u <= 1 + _EPS:
        return t, u
    return None


def _leg_clear(p: Point2D, q: Point2D, blockers: Sequence[Segment]) -> bool:
    """True if the open segment p->q crosses no blocker (endpoint touches are allowed)."""
    length = p.distance(q)
    tol = 1e-7 / max(length, 1e-12)
    for seg in blockers:
        hit = _segment_hit(p, q, seg)
        if hit is not None and tol < hit[0] < 1 - tol:
            return False
    return True


def _check_node(room: Room, p: Point2D, name: str):
    if not room.contains(p):
        raise GeometryError(f"{name} {tuple(p)} lies outside the room bounds {room.bounds}")
    for seg in (*room.walls, *room.obstacles):
        if seg.distance_to(p) < 1e-6:
            raise GeometryError(f"{name} {tuple(p)} lies on a wall or obstacle")


def _component(length: float, losses_db: float, aod: float, aoa: float, order: int,
               bounces: tuple[int, ...], carrier_hz: float) -> PathComponent:
    wavelength = SPEED_OF_LIGHT / carrier_hz
    amplitude = wavelength / (4 * math.pi * length) * 10 ** (-losses_db / 20)
    phase = (-2 * math.pi / wavelength * length) % (2 * math.pi)
    return PathComponent(
        gain=complex(amplitude * math.cos(phase), amplitude * math.sin(phase)),
        aod=aod % 360.0,
        aoa=aoa % 360.0,
        delay=length / SPEED_OF_LIGHT * 1e9,
        order=order,
        length=length,
        bounces=bounces,
    )


def relative_gain_db(component: PathComponent, carrier_hz: float = DEFAULT_CARRIER_HZ) -> float:
    """Path gain in dB relative to free space at 1 m."""
    wavelength = SPEED_OF_LIGHT / carrier_hz
    return 20 * math.log10(abs(component.gain)) - 20 * math.log10(wavelength / (4 * math.pi))


def _trace_sequence(room: Room, tx: Point2D, rx: Point2D, seq: tuple[int, ...],
                    blockers: Sequence[Segment]) -> Optional[list[Point2D]]:
    """Bounce points for reflector sequence `seq`, or None if the sequence is not realizable."""
    walls = room.walls
    images = [tx]
    for idx in seq:
        images.append(walls[idx].mirror(images[-1]))
    points: list[Point2D] = []
    target = rx
    for k in range(len(seq) - 1, -1, -1):
        wall = walls[seq[k]]
        src = images[k + 1]
        hit = _segment_hit(src, target, wall)
        if hit is None:
            return None
        t, _ = hit
        if not (_EPS < t < 1 - _EPS):
            return None
        bp = Point2D(src.x + t * (target.x - src.x), src.y + t * (target.y - src.y))
        points.insert(0, bp)
        target = bp
    route = [tx, *points, rx]
    for a, b in zip(route, route[1:]):
        if a.distance(b) < _EPS or not _leg_clear(a, b, blockers):
            return None
    return route


def trace_paths(room: Room, tx: Point2D, rx: Point2D, max_order: int = 1,
                min_gain: float = -120.0, carrier_hz: float = DEFAULT_CARRIER_HZ) -> PathSet:
    """Enumerate LoS and specular reflections up to `max_order` bounces.

    `min_gain` is in dB relative to free-space loss at 1 m; weaker components are dropped.
    """
    if max_order not in (0, 1, 2):
        raise ValueError(f"max_order must be 0, 1 or 2, got {max_order}")
    if tx.distance(rx) < _EPS:
        raise GeometryError("tx and rx coincide")
    _check_node(room, tx, "tx")
    _check_node(room, rx, "rx")

    blockers = (*room.walls, *room.obstacles)
    comps: list[PathComponent] = []

    if _leg_clear(tx, rx, blockers):
        d = tx.distance(rx)
        comps.append(_component(d, 0.0, tx.bearing_to(rx), rx.bearing_to(tx), 0, (), carrier_hz))

    n = len(room.walls)
    for order in range(1, max_order + 1):
        for seq in itertools.product(range(n), repeat=order):
            if any(a == b for a, b in zip(seq, seq[1:])):
                continue
            route = _trace_sequence(room, tx, rx, seq, blockers)
            if route is None:
                continue
            length = sum(a.distance(b) for a, b in zip(route, route[1:]))
            loss = sum(room.walls[i].reflection_loss for i in seq)
            comps.append(_component(length, loss, tx.bearing_to(route[1]),
                                    rx.bearing_to(route[-2]), order, seq, carrier_hz))

    comps = [c for c in comps if relative_gain_db(c, carrier_hz) >= min_gain]
    return PathSet(tuple(comps), tx, rx)


def eve_grid(room: Room, spacing: float, exclude: Iterable[Point2D] = (),
             exclusion_radius: float = 0.1,
             region: Optional[tuple[float, float, float, float]] = None) -> list[Point2D]:
    """Row-major regular grid of candidate eavesdropper positions.

    The grid starts at the lower-left corner of `region` (default: room bounds) and
    includes the far edges when they fall on a grid line.
    """
    if not spacing > 0:
        raise ValueError(f"spacing must be positive, got {spacing}")
    xmin, ymin, xmax, ymax = region if region is not None else room.bounds
    if spacing > (xmax - xmin) + _EPS or spacing > (ymax - ymin) + _EPS:
        raise ValueError(f"spacing {spacing} exceeds the grid region; grid would be degenerate")
    nx = int(math.floor((xmax - xmin) / spacing + 1e-9)) + 1
    ny = int(math.floor((ymax - ymin) / spacing + 1e-9)) + 1
    excluded = list(exclude)
    points = []
    for j in range(ny):
        for i in range(nx):
            p = Point2D(round(xmin + i * spacing, 12), round(ymin + j * spacing, 12))
            if not room.contains(p):
                continue
            if any(p.distance(e) < exclusion_radius for e in excluded):
                continue
            points.append(p)
    if not points:
        raise ValueError("grid is empty after exclusions")
    return points
