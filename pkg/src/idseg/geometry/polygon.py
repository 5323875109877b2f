"""Polygon area, convexity, clipping, rasterization and IoU.

Points are ``(x, y)`` pairs with x to the right and y down (x is the column,
y the row). A polygon is "counter-clockwise" here when its signed shoelace
area is positive; that is the orientation every :func:`as_quad` result has.
"""

from __future__ import annotations

import numpy as np

RASTER_GRID = 1024


class NotConvexError(ValueError):
    pass


def _points(points):
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) array of points, got shape {pts.shape}")
    return pts


def signed_area(points):
    pts = _points(points)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)) / 2.0


def polygon_area(points):
    """Absolute shoelace area."""
    return abs(signed_area(points))


def polygon_perimeter(points):
    pts = _points(points)
    return float(np.hypot(*(np.roll(pts, -1, axis=0) - pts).T).sum())


def orient_ccw(points):
    pts = _points(points)
    return pts[::-1].copy() if signed_area(pts) < 0 else pts.copy()


def as_quad(points):
    """Return a (4, 2) float array oriented CCW, starting at the top-left-most
    vertex (smallest ``x + y``)."""
    pts = orient_ccw(points)
    if pts.shape != (4, 2):
        raise ValueError(f"a quad needs exactly 4 vertices, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("quad vertices must be finite")
    start = int(np.argmin(pts.sum(axis=1)))
    return np.roll(pts, -start, axis=0)


def is_convex(points):
    """True when every non-zero turn of the closed polygon has the same sign."""
    pts = _points(points)
    edges = np.roll(pts, -1, axis=0) - pts
    nxt = np.roll(edges, -1, axis=0)
    cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
    return not (np.any(cross > 0) and np.any(cross < 0))


def convex_clip(subject, clip):
    """Intersection of two convex CCW polygons (Sutherland-Hodgman).

    Returns an ``(m, 2)`` array, ``m == 0`` when the polygons are disjoint.
    """
    subject = _points(subject)
    clip = _points(clip)
    for name, poly in (("subject", subject), ("clip", clip)):
        if not is_convex(poly):
            raise NotConvexError(f"{name} polygon is not convex")
    output = list(map(tuple, subject))
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay

        def side(p):
            return ex * (p[1] - ay) - ey * (p[0] - ax)

        inp = output
        output = []
        prev = inp[-1]
        s_prev = side(prev)
        for cur in inp:
            s_cur = side(cur)
            if s_cur >= 0:
                if s_prev < 0:
                    output.append(_intersect(prev, cur, s_prev, s_cur))
                output.append(cur)
            elif s_prev >= 0:
                output.append(_intersect(prev, cur, s_prev, s_cur))
            prev, s_prev = cur, s_cur
    return np.array(output, dtype=np.float64).reshape(-1, 2)


def _intersect(p, q, sp, sq):
    t = sp / (sp - sq)
    return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))


def points_in_polygon(px, py, polygon):
    """Even-odd inside test; points lying exactly on an edge count as inside."""
    poly = _points(polygon)
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    inside = np.zeros(np.broadcast(px, py).shape, dtype=bool)
    on_edge = np.zeros_like(inside)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[i - 1]
        crosses = (y1 > py) != (y2 > py)
        if y1 != y2:
            x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (px < x_at)
        cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        on_edge |= (
            (cross == 0)
            & (px >= min(x1, x2))
            & (px <= max(x1, x2))
            & (py >= min(y1, y2))
            & (py <= max(y1, y2))
        )
    return inside | on_edge


def rasterize_polygon(polygon, h, w):
    """Boolean ``h x w`` grid; cell (r, c) is set when its centre is inside."""
    ys = np.arange(h, dtype=np.float64)[:, None] + 0.5
    xs = np.arange(w, dtype=np.float64)[None, :] + 0.5
    return points_in_polygon(xs, ys, polygon)


def raster_iou(a, b, grid=RASTER_GRID):
    """IoU by counting cells of a ``grid x grid`` raster over the joint bounds."""
    a = _points(a)
    b = _points(b)
    both = np.vstack([a, b])
    lo = both.min(axis=0)
    span = both.max(axis=0) - lo
    if span[0] <= 0 or span[1] <= 0:
        return 0.0
    scale = grid / span
    ma = rasterize_polygon((a - lo) * scale, grid, grid)
    mb = rasterize_polygon((b - lo) * scale, grid, grid)
    union = np.count_nonzero(ma | mb)
    if union == 0:
        return 0.0
    return np.count_nonzero(ma & mb) / union


def exact_iou(a, b):
    a = orient_ccw(a)
    b = orient_ccw(b)
    inter = polygon_area(convex_clip(a, b))
    union = polygon_area(a) + polygon_area(b) - inter
    if union <= 0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def quad_iou(a, b):
    """Intersection over union of two quads.

    Convex inputs are clipped exactly; anything else (self-intersecting or
    concave) falls back to :func:`raster_iou`.
    """
    a = orient_ccw(a)
    b = orient_ccw(b)
    if is_convex(a) and is_convex(b):
        return exact_iou(a, b)
    return raster_iou(a, b)
