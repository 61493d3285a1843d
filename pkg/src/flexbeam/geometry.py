"""Planar geometry primitives: distances and smallest enclosing circles.

Coordinates are flat local tangent-plane kilometres. The service regions
involved are a few hundred km across, so no spherical-earth correction is
applied.
"""
from __future__ import annotations

import math
import random
from typing import Iterable, NamedTuple, Sequence


class Point(NamedTuple):
    x: float
    y: float


class Circle(NamedTuple):
    center: Point
    radius: float

    def contains(self, p: Point, slack: float = 1e-9) -> bool:
        """True if `p` lies inside the circle, with absolute slack in km."""
        return distance(self.center, p) <= self.radius + slack


def distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Euclidean distance between two planar points in km."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


# Relative tolerance used when testing membership during circle construction.
# Keeps the algorithm stable when many points sit on the boundary.
_EPS = 1e-12


def smallest_enclosing_circle(points: Iterable[Sequence[float]], seed: int = 0) -> Circle:
    """Smallest circle containing every input point (Welzl's algorithm).

    Runs the incremental randomized variant in expected O(n) time. The
    internal shuffle is keyed by `seed`, so results are bit-reproducible for
    a fixed input order and seed; the enclosing circle itself is unique, so
    the choice of seed never changes the answer beyond roundoff.

    Raises ValueError on an empty input.
    """
    pts = [Point(float(p[0]), float(p[1])) for p in points]
    if not pts:
        raise ValueError("no points")
    shuffled = list(pts)
    random.Random(seed).shuffle(shuffled)

    c: Circle | None = None
    for i, p in enumerate(shuffled):
        if c is None or not _inside(c, p):
            c = _circle_with_point(shuffled[: i + 1], p)
    assert c is not None
    return c


def _inside(c: Circle, p: Point) -> bool:
    tol = _EPS * max(1.0, c.radius)
    return distance(c.center, p) <= c.radius + tol


def _circle_with_point(pts: list[Point], p: Point) -> Circle:
    # Smallest circle over pts with p known to lie on the boundary.
    c = Circle(p, 0.0)
    for j, q in enumerate(pts):
        if not _inside(c, q):
            if c.radius == 0.0:
                c = _diameter_circle(p, q)
            else:
                c = _circle_with_two_points(pts[: j + 1], p, q)
    return c


def _circle_with_two_points(pts: list[Point], p: Point, q: Point) -> Circle:
    # Smallest circle over pts with p and q on the boundary.
    circ = _diameter_circle(p, q)
    left: Circle | None = None
    right: Circle | None = None
    px, py = p
    qx, qy = q
    for r in pts:
        if _inside(circ, r):
            continue
        cross = _cross(px, py, qx, qy, r.x, r.y)
        c = _circumcircle(p, q, r)
        if c is None:
            continue
        d = _cross(px, py, qx, qy, c.center.x, c.center.y)
        if cross > 0.0 and (left is None or d > _cross(px, py, qx, qy, left.center.x, left.center.y)):
            left = c
        elif cross < 0.0 and (right is None or d < _cross(px, py, qx, qy, right.center.x, right.center.y)):
            right = c
    if left is None and right is None:
        return circ
    if left is None:
        return right  # type: ignore[return-value]
    if right is None:
        return left
    return left if left.radius <= right.radius else right


def _cross(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _diameter_circle(a: Point, b: Point) -> Circle:
    cx = (a.x + b.x) / 2.0
    cy = (a.y + b.y) / 2.0
    center = Point(cx, cy)
    r = max(distance(center, a), distance(center, b))
    return Circle(center, r)


def _circumcircle(a: Point, b: Point, c: Point) -> Circle | None:
    # Translated to the bounding-box midpoint for numerical stability.
    ox = (min(a.x, b.x, c.x) + max(a.x, b.x, c.x)) / 2.0
    oy = (min(a.y, b.y, c.y) + max(a.y, b.y, c.y)) / 2.0
    ax, ay = a.x - ox, a.y - oy
    bx, by = b.x - ox, b.y - oy
    cx, cy = c.x - ox, c.y - oy
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None  # collinear; caller falls back to a diameter circle
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    center = Point(ox + ux, oy + uy)
    r = max(distance(center, a), distance(center, b), distance(center, c))
    return Circle(center, r)
