"""Planar geometry: vectors, axis-aligned rectangles, swept collision queries.

Coordinates are screen-style: x grows rightward, y grows downward. All
routines are pure and allocation-light; the simulator calls them every tick.
"""

from __future__ import annotations

import math
from typing import NamedTuple


class Vec2(NamedTuple):
    """Immutable 2-vector. NamedTuple base keeps construction cheap in the
    per-tick hot paths; + and - are vector ops, not tuple concatenation."""

    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":  # type: ignore[override]
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def scaled(self, k: float) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        # sqrt is correctly rounded by IEEE-754, unlike hypot on some libms,
        # so trajectories hash identically across platforms.
        return math.sqrt(self.x * self.x + self.y * self.y)

    def distance_to(self, other: "Vec2") -> float:
        dx = self.x - other.x
        dy = self.y - other.y
        return math.sqrt(dx * dx + dy * dy)

    def normalized(self) -> "Vec2":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return Vec2(self.x / n, self.y / n)

    def perpendicular(self) -> "Vec2":
        """Rotate 90 degrees counterclockwise in screen coordinates."""
        return Vec2(self.y, -self.x)

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)


ZERO = Vec2(0.0, 0.0)


def clamp(value: float, lo: float, hi: float) -> float:
    return lo if value < lo else hi if value > hi else value


def segment_closest_point_param(p0: Vec2, p1: Vec2, point: Vec2) -> float:
    """Parameter t in [0, 1] of the point on segment p0->p1 closest to `point`."""
    d = p1 - p0
    denom = d.dot(d)
    if denom == 0.0:
        return 0.0
    return clamp((point - p0).dot(d) / denom, 0.0, 1.0)


def segment_point_distance(p0: Vec2, p1: Vec2, point: Vec2) -> float:
    t = segment_closest_point_param(p0, p1, point)
    closest = Vec2(p0.x + t * (p1.x - p0.x), p0.y + t * (p1.y - p0.y))
    return closest.distance_to(point)


def segment_circle_hit(p0: Vec2, p1: Vec2, center: Vec2, radius: float) -> float | None:
    """Earliest t in [0, 1] where the swept point enters the circle, else None.

    Starting inside the circle reports t = 0.
    """
    d = p1 - p0
    f = p0 - center
    if f.dot(f) <= radius * radius:
        return 0.0
    a = d.dot(d)
    if a == 0.0:
        return None
    b = 2.0 * f.dot(d)
    c = f.dot(f) - radius * radius
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return None
    sqrt_disc = math.sqrt(disc)
    t = (-b - sqrt_disc) / (2.0 * a)
    if 0.0 <= t <= 1.0:
        return t
    return None


def segment_rect_hit(
    p0: Vec2, p1: Vec2, min_corner: Vec2, max_corner: Vec2
) -> float | None:
    """Earliest t in [0, 1] where the swept point enters the rectangle (slab test)."""
    d = p1 - p0
    t_enter = 0.0
    t_exit = 1.0
    for start, delta, lo, hi in (
        (p0.x, d.x, min_corner.x, max_corner.x),
        (p0.y, d.y, min_corner.y, max_corner.y),
    ):
        if delta == 0.0:
            if start < lo or start > hi:
                return None
            continue
        t0 = (lo - start) / delta
        t1 = (hi - start) / delta
        if t0 > t1:
            t0, t1 = t1, t0
        t_enter = max(t_enter, t0)
        t_exit = min(t_exit, t1)
        if t_enter > t_exit:
            return None
    return t_enter


def segment_intersects_rect(
    p0: Vec2, p1: Vec2, min_corner: Vec2, max_corner: Vec2
) -> bool:
    return segment_rect_hit(p0, p1, min_corner, max_corner) is not None


def point_in_rect(point: Vec2, min_corner: Vec2, max_corner: Vec2) -> bool:
    return min_corner.x <= point.x <= max_corner.x and min_corner.y <= point.y <= max_corner.y


def circle_rect_distance(center: Vec2, min_corner: Vec2, max_corner: Vec2) -> float:
    """Distance from a point to the rectangle (0 when inside)."""
    cx = clamp(center.x, min_corner.x, max_corner.x)
    cy = clamp(center.y, min_corner.y, max_corner.y)
    return center.distance_to(Vec2(cx, cy))


def circle_rect_overlap(
    center: Vec2, radius: float, min_corner: Vec2, max_corner: Vec2
) -> bool:
    return circle_rect_distance(center, min_corner, max_corner) < radius


def rects_overlap(
    a_min: Vec2, a_max: Vec2, b_min: Vec2, b_max: Vec2
) -> bool:
    return (
        a_min.x < b_max.x
        and b_min.x < a_max.x
        and a_min.y < b_max.y
        and b_min.y < a_max.y
    )


def ray_point_approach(origin: Vec2, direction: Vec2, point: Vec2) -> tuple[float, float]:
    """(t, distance) of the closest approach of the ray origin + t*direction, t >= 0."""
    to_point = point - origin
    denom = direction.dot(direction)
    if denom == 0.0:
        return 0.0, to_point.norm()
    t = max(0.0, to_point.dot(direction) / denom)
    closest = Vec2(origin.x + t * direction.x, origin.y + t * direction.y)
    return t, closest.distance_to(point)
