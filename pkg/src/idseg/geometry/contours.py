"""From a probability map to a single document quadrilateral."""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .polygon import as_quad, is_convex, polygon_area, polygon_perimeter

# clockwise in image coordinates (row down): E, SE, S, SW, W, NW, N, NE
_OFFSETS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))
_DIRECTION = {d: i for i, d in enumerate(_OFFSETS)}
_EIGHT = np.ones((3, 3), dtype=bool)


def threshold_map(prob_map, tau=0.5):
    """Boolean ``h x w`` mask of ``prob_map >= tau`` (trailing channel dropped)."""
    p = np.asarray(prob_map)
    if p.ndim == 3:
        if p.shape[2] != 1:
            raise ValueError(f"expected a single-channel map, got shape {p.shape}")
        p = p[:, :, 0]
    if p.ndim != 2 or 0 in p.shape:
        raise ValueError(f"expected a non-empty h x w map, got shape {p.shape}")
    return p >= tau


def _trace(fg, r0, c0):
    # fg is zero-padded by one pixel so neighbour lookups never leave the array
    start = (r0, c0)
    west = _DIRECTION[(0, -1)]
    first = None
    for k in range(8):
        d = _OFFSETS[(west + k) % 8]
        if fg[r0 + d[0], c0 + d[1]]:
            first = (r0 + d[0], c0 + d[1])
            break
    if first is None:
        return [start]
    points = []
    prev, cur = first, start
    while True:
        back = _DIRECTION[(prev[0] - cur[0], prev[1] - cur[1])]
        for k in range(1, 9):
            d = _OFFSETS[(back - k) % 8]
            nxt = (cur[0] + d[0], cur[1] + d[1])
            if fg[nxt]:
                break
        points.append(cur)
        if nxt == start and cur == first:
            return points
        prev, cur = cur, nxt


def extract_contours(mask):
    """Outer border of every 8-connected foreground component.

    Each contour is an ``(m, 2)`` integer array of ``(x, y)`` pixel indices,
    ordered along the border. Contours are returned in raster order of their
    top-most, then left-most pixel. Holes are ignored.
    """
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=_EIGHT)
    if count == 0:
        return []
    flat = labels.ravel()
    found, first = np.unique(flat, return_index=True)
    padded = np.pad(mask, 1)
    contours = []
    for lab, pos in zip(found, first):
        if lab == 0:
            continue
        r, c = divmod(int(pos), mask.shape[1])
        pts = _trace(padded, r + 1, c + 1)
        contours.append(np.array([(cc - 1, rr - 1) for rr, cc in pts], dtype=np.int64))
    return contours


def _segment_distance(pts, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.hypot(*(pts - a).T)
    t = np.clip((pts - a) @ ab / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(pts - proj).T)


def _dp_indices(pts, epsilon):
    keep = np.zeros(len(pts), dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        d = _segment_distance(pts[i + 1 : j], pts[i], pts[j])
        k = int(np.argmax(d))
        if d[k] > epsilon:
            k += i + 1
            keep[k] = True
            stack.append((i, k))
            stack.append((k, j))
    return np.flatnonzero(keep)


def simplify_polyline(points, epsilon):
    """Douglas-Peucker on an open polyline; both endpoints are kept."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) <= 2:
        return pts.copy()
    return pts[_dp_indices(pts, epsilon)]


def _farthest_pair(pts):
    cand = np.arange(len(pts))
    if len(pts) > 64:
        try:
            cand = ConvexHull(pts).vertices
        except QhullError:
            pass
    sub = pts[cand]
    d2 = ((sub[:, None, :] - sub[None, :, :]) ** 2).sum(axis=-1)
    i, j = np.unravel_index(int(np.argmax(d2)), d2.shape)
    i, j = sorted((int(cand[i]), int(cand[j])))
    return i, j


def simplify_polygon_indices(points, epsilon):
    """Indices (into ``points``) kept by closed-polygon Douglas-Peucker."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    if n <= 3:
        return np.arange(n)
    i, j = _farthest_pair(pts)
    if i == j:
        return np.array([0])
    arc1 = np.arange(i, j + 1)
    arc2 = np.concatenate([np.arange(j, n), np.arange(0, i + 1)])
    keep1 = arc1[_dp_indices(pts[arc1], epsilon)]
    keep2 = arc2[_dp_indices(pts[arc2], epsilon)]
    kept = [int(k) for k in np.concatenate([keep1[:-1], keep2[:-1]])]
    return np.array(_merge_redundant(pts, kept, epsilon), dtype=np.int64)


def _merge_redundant(pts, kept, epsilon):
    # The cut points survive the first pass unconditionally and ties in the
    # farthest-point search can keep mid-edge points. Drop any vertex whose
    # merged arc still stays within epsilon, cheapest first.
    n = len(pts)
    while len(kept) > 3:
        best, best_dev = None, None
        for pos in range(len(kept)):
            a, b = kept[pos - 1], kept[(pos + 1) % len(kept)]
            arc = (a + np.arange(1, (b - a) % n)) % n
            dev = float(_segment_distance(pts[arc], pts[a], pts[b]).max())
            if dev <= epsilon and (best_dev is None or dev < best_dev):
                best, best_dev = pos, dev
        if best is None:
            break
        del kept[best]
    return kept


def simplify_polygon(contour, epsilon):
    """Douglas-Peucker on a closed contour.

    The contour is cut at its two farthest-apart points and each arc is
    simplified independently. Every dropped point lies within ``epsilon``
    of the returned polygon.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    pts = np.asarray(contour, dtype=np.float64)
    return pts[simplify_polygon_indices(pts, epsilon)]


def _closed_perimeter(pts):
    if len(pts) < 2:
        return 0.0
    return polygon_perimeter(pts)


def _fit_side(pts, inward_ref):
    centre = pts.mean(axis=0)
    _, _, vt = np.linalg.svd(pts - centre, full_matrices=False)
    normal = vt[1]
    if (inward_ref - centre) @ normal > 0:
        normal = -normal
    # border pixel centres sit on average half a cell inside the true edge,
    # measured along the axis closest to the normal
    offset = 0.5 * max(abs(normal[0]), abs(normal[1]))
    return normal, float(normal @ centre) + offset


def refine_corners(points, corner_idx):
    """Re-derive quad corners by fitting a line to each side of the contour.

    ``points`` are contour pixel centres and ``corner_idx`` the four indices
    chosen by simplification. Returns ``None`` when a side has too few
    samples or two fitted sides are nearly parallel.
    """
    n = len(points)
    corner_idx = list(corner_idx)
    centroid = points[corner_idx].mean(axis=0)
    lines = []
    for k in range(4):
        a, b = corner_idx[k], corner_idx[(k + 1) % 4]
        span = (b - a) % n
        trim = max(1, span // 8)
        idx = (a + np.arange(trim, span - trim + 1)) % n
        if len(idx) < 3:
            return None
        lines.append(_fit_side(points[idx], centroid))
    corners = []
    for k in range(4):
        (n1, c1), (n2, c2) = lines[k - 1], lines[k]
        mat = np.array([n1, n2])
        det = np.linalg.det(mat)
        if abs(det) < 1e-3:
            return None
        corners.append(np.linalg.solve(mat, [c1, c2]))
    return np.array(corners)


def _four_corners(pts, epsilon_frac, max_epsilon_frac):
    # Loosen the tolerance in 0.01 steps until the contour simplifies to
    # four corners; stop as soon as it drops below four.
    perimeter = _closed_perimeter(pts)
    frac = epsilon_frac
    while True:
        idx = simplify_polygon_indices(pts, frac * perimeter)
        if len(idx) <= 4 or max_epsilon_frac is None:
            return idx if len(idx) == 4 else None
        frac = round(frac + 0.01, 10)
        if frac > max_epsilon_frac + 1e-12:
            return None


def select_document_quad(
    contours,
    mask_h,
    mask_w,
    min_area_frac=0.01,
    epsilon_frac=0.02,
    refine=True,
    max_epsilon_frac=0.05,
):
    """Pick the largest convex four-cornered contour, or ``None``.

    Each contour is simplified with ``epsilon = epsilon_frac * perimeter``;
    a candidate must have exactly four vertices, be convex and cover at least
    ``min_area_frac`` of the mask. A contour that keeps more than four
    vertices is retried with the fraction raised in 0.01 steps up to
    ``max_epsilon_frac`` (``None`` disables the retry). The returned quad is
    in continuous mask coordinates (pixel ``(r, c)`` spans
    ``[c, c+1] x [r, r+1]``), oriented CCW from its top-left-most vertex.
    """
    if not (0 < min_area_frac < 1 and 0 < epsilon_frac < 1):
        raise ValueError("min_area_frac and epsilon_frac must lie in (0, 1)")
    if max_epsilon_frac is not None and not 0 < max_epsilon_frac < 1:
        raise ValueError("max_epsilon_frac must lie in (0, 1) or be None")
    min_area = min_area_frac * mask_h * mask_w
    best, best_area = None, -1.0
    for contour in contours:
        pts = np.asarray(contour, dtype=np.float64) + 0.5
        if len(pts) < 4:
            continue
        idx = _four_corners(pts, epsilon_frac, max_epsilon_frac)
        if idx is None:
            continue
        quad = pts[idx]
        if refine:
            refined = refine_corners(pts, idx)
            if refined is not None and is_convex(refined):
                quad = refined
        area = polygon_area(quad)
        if area < min_area or not is_convex(quad) or area <= best_area:
            continue
        best, best_area = quad, area
    return None if best is None else as_quad(best)
