"""Planar contact geometry of the base cross-section.

The body outline used for contact and localization is an equilateral
triangle (side walls) whose vertices point along the wheel placement
directions, plus the three wheel discs.  Each disc is centered ``R`` from
the body center along its placement angle and partially protrudes past
the adjacent walls near its vertex, so objects can strike a wheel before
any wall.

These helpers sit inside the physics inner loop, hence the scalar math.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import RobotParams


@dataclass
class BodyOutline:
    """Triangle vertices and wheel-disc centers for a given pose."""

    center: np.ndarray
    theta: float
    vertices: np.ndarray        # (3, 2), world frame
    wheel_centers: np.ndarray   # (3, 2), world frame
    wheel_radius: float


def body_outline(x: float, y: float, theta: float, p: RobotParams) -> BodyOutline:
    c = np.array([x, y])
    angles = theta + np.asarray(p.phi)
    dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    verts = c + p.tri_circumradius * dirs
    wheels = c + p.R * dirs
    return BodyOutline(center=c, theta=theta, vertices=verts,
                       wheel_centers=wheels, wheel_radius=p.r_w)


def triangle_edges(outline: BodyOutline):
    """Edges as (start, end) vertex pairs, counterclockwise."""
    v = outline.vertices
    return [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])]


def point_in_triangle(pt, outline: BodyOutline, tol: float = 0.0) -> bool:
    """True when ``pt`` lies inside the (CCW) triangle, with ``tol`` slack."""
    px, py = float(pt[0]), float(pt[1])
    v = outline.vertices
    for i in range(3):
        ax, ay = v[i, 0], v[i, 1]
        bx, by = v[(i + 1) % 3, 0], v[(i + 1) % 3, 1]
        # CCW winding: inside points have nonnegative cross product
        if (bx - ax) * (py - ay) - (by - ay) * (px - ax) < -tol:
            return False
    return True


def closest_point_on_segment(pt, a, b) -> np.ndarray:
    px, py = float(pt[0]), float(pt[1])
    ax, ay = float(a[0]), float(a[1])
    bx, by = float(b[0]), float(b[1])
    ex, ey = bx - ax, by - ay
    denom = ex * ex + ey * ey
    t = 0.0 if denom == 0.0 else ((px - ax) * ex + (py - ay) * ey) / denom
    t = min(1.0, max(0.0, t))
    return np.array([ax + t * ex, ay + t * ey])


def closest_point_on_triangle_boundary(pt, outline: BodyOutline):
    """Closest boundary point and the outward wall normal at it."""
    px, py = float(pt[0]), float(pt[1])
    v = outline.vertices
    best_d2 = math.inf
    best = (0.0, 0.0)
    best_n = (0.0, 0.0)
    for i in range(3):
        ax, ay = v[i, 0], v[i, 1]
        bx, by = v[(i + 1) % 3, 0], v[(i + 1) % 3, 1]
        ex, ey = bx - ax, by - ay
        denom = ex * ex + ey * ey
        t = ((px - ax) * ex + (py - ay) * ey) / denom
        t = min(1.0, max(0.0, t))
        qx, qy = ax + t * ex, ay + t * ey
        d2 = (qx - px) ** 2 + (qy - py) ** 2
        if d2 < best_d2:
            best_d2 = d2
            best = (qx, qy)
            en = math.sqrt(denom)
            best_n = (ey / en, -ex / en)  # outward for CCW winding
    return np.array(best), np.array(best_n)


def triangle_penetration(pt, outline: BodyOutline):
    """Penetration depth, outward normal and surface point for a point
    inside the triangle; ``None`` when the point is outside."""
    if not point_in_triangle(pt, outline):
        return None
    q, n = closest_point_on_triangle_boundary(pt, outline)
    depth = math.hypot(q[0] - pt[0], q[1] - pt[1])
    return depth, n, q


def disc_penetration(pt, center, radius: float):
    """Penetration of a point into a disc; ``None`` when outside."""
    dx = float(pt[0]) - float(center[0])
    dy = float(pt[1]) - float(center[1])
    dist = math.hypot(dx, dy)
    if dist >= radius:
        return None
    if dist < 1e-12:
        nx, ny = 1.0, 0.0
    else:
        nx, ny = dx / dist, dy / dist
    depth = radius - dist
    surf = np.array([center[0] + radius * nx, center[1] + radius * ny])
    return depth, np.array([nx, ny]), surf


def line_triangle_intersections(point, direction, outline: BodyOutline,
                                eps: float = 1e-12):
    """Parameters ``t`` and points where ``point + t*direction`` crosses the
    triangle boundary, sorted by ``t``.  Endpoint hits are deduplicated."""
    p0x, p0y = float(point[0]), float(point[1])
    dx, dy = float(direction[0]), float(direction[1])
    v = outline.vertices
    hits = []
    for i in range(3):
        ax, ay = v[i, 0], v[i, 1]
        bx, by = v[(i + 1) % 3, 0], v[(i + 1) % 3, 1]
        ex, ey = bx - ax, by - ay
        denom = dx * ey - dy * ex
        if abs(denom) < eps:
            continue
        wx, wy = ax - p0x, ay - p0y
        t = (wx * ey - wy * ex) / denom
        u = (wx * dy - wy * dx) / denom
        if -1e-9 <= u <= 1.0 + 1e-9:
            uc = min(1.0, max(0.0, u))
            hits.append((t, np.array([ax + uc * ex, ay + uc * ey])))
    hits.sort(key=lambda h: h[0])
    dedup = []
    for t, q in hits:
        if dedup and abs(t - dedup[-1][0]) < 1e-9:
            continue
        dedup.append((t, q))
    return dedup


def line_circle_intersections(point, direction, center, radius: float):
    """Parameters ``t`` where ``point + t*direction`` crosses a circle."""
    px = float(point[0]) - float(center[0])
    py = float(point[1]) - float(center[1])
    dx, dy = float(direction[0]), float(direction[1])
    a = dx * dx + dy * dy
    if a == 0.0:
        return []
    b = 2.0 * (px * dx + py * dy)
    c = px * px + py * py - radius * radius
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    s = math.sqrt(disc)
    t1 = (-b - s) / (2.0 * a)
    t2 = (-b + s) / (2.0 * a)
    return [t1, t2] if t1 <= t2 else [t2, t1]


def sample_wall_point(outline: BodyOutline, edge_index: int, frac: float):
    """Point at fraction ``frac`` along wall ``edge_index`` plus its inward
    normal (unit vector pointing into the body)."""
    a, b = triangle_edges(outline)[edge_index]
    q = a + frac * (b - a)
    ex, ey = b[0] - a[0], b[1] - a[1]
    en = math.hypot(ex, ey)
    return q, np.array([-ey / en, ex / en])