import numpy as np
import pytest


def numeric_grad(f, x, h=1e-3, indices=None):
    """Central finite differences of scalar ``f()`` w.r.t. array ``x`` (in place).

    ``x`` must be float64. Only ``indices`` (flat) are probed when given.
    """
    flat = x.reshape(-1)
    idx = range(flat.size) if indices is None else indices
    out = np.zeros(flat.size)
    for i in idx:
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        out[i] = (fp - fm) / (2 * h)
    return out.reshape(x.shape)


def kink_free_grad(loss_and_pattern, x, indices, h=1e-3, wanted=None):
    """Central differences at ``indices`` of ``x``, skipping probes whose
    +-h perturbation flips any ReLU (the derivative is undefined there).

    ``loss_and_pattern()`` returns ``(loss, boolean activation pattern)``.
    Returns ``(used indices, numeric derivatives)``.
    """
    flat = x.reshape(-1)
    _, base = loss_and_pattern()
    used, values = [], []
    for i in indices:
        old = flat[i]
        flat[i] = old + h
        fp, pp = loss_and_pattern()
        flat[i] = old - h
        fm, pm = loss_and_pattern()
        flat[i] = old
        if np.array_equal(pp, base) and np.array_equal(pm, base):
            used.append(i)
            values.append((fp - fm) / (2 * h))
            if wanted is not None and len(used) == wanted:
                break
    return np.array(used, dtype=int), np.array(values)


def rel_error(analytic, numeric, floor=1e-7):
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    return float(np.max(np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def document_quad(rng, lo=0.0, hi=128.0, min_area_frac=0.05):
    """Document-like convex quad: interior angles in [45, 135] degrees and
    no side shorter than 12% of the perimeter."""
    span = hi - lo
    return random_convex_quad(
        rng, lo, hi, min_area_frac * span * span, angle_range=(45, 135), min_side=0.12
    )


def interior_angles(quad):
    """Interior angles in degrees of a convex polygon."""
    prev = np.roll(quad, 1, axis=0) - quad
    nxt = np.roll(quad, -1, axis=0) - quad
    cos = (prev * nxt).sum(axis=1) / (np.hypot(*prev.T) * np.hypot(*nxt.T))
    return np.degrees(np.arccos(np.clip(cos, -1, 1)))


def random_convex_quad(rng, lo=0.0, hi=64.0, min_area=0.0, angle_range=None, min_side=0.0):
    """Convex quad from four sorted angles around a random centre.

    ``angle_range=(a, b)`` bounds every interior angle and ``min_side`` every
    side as a fraction of the perimeter; together they keep out shapes that
    are triangles in all but name.
    """
    span = hi - lo
    while True:
        centre = rng.uniform(lo + 0.3 * span, hi - 0.3 * span, size=2)
        angles = np.sort(rng.uniform(0, 2 * np.pi, size=4))
        radii = rng.uniform(0.15 * span, 0.3 * span, size=4)
        quad = centre + np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
        x, y = quad[:, 0], quad[:, 1]
        area2 = np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)
        edges = np.roll(quad, -1, axis=0) - quad
        nxt = np.roll(edges, -1, axis=0)
        cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
        if abs(area2) / 2 <= min_area or not (np.all(cross > 0) or np.all(cross < 0)):
            continue
        if angle_range is not None:
            ang = interior_angles(quad)
            if ang.min() < angle_range[0] or ang.max() > angle_range[1]:
                continue
        sides = np.hypot(*edges.T)
        if sides.min() < min_side * sides.sum():
            continue
        return quad


def pip_oracle(x, y, poly):
    """Crossing-number test for one point; points on an edge count as inside."""
    n = len(poly)
    inside = False
    for i in range(n):
        (x1, y1), (x2, y2) = poly[i], poly[(i + 1) % n]
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        if cross == 0 and min(x1, x2) <= x <= max(x1, x2) and min(y1, y2) <= y <= max(y1, y2):
            return True
        if (y1 > y) != (y2 > y):
            xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xi:
                inside = not inside
    return inside


def raster_oracle(poly, h, w):
    return np.array(
        [[pip_oracle(c + 0.5, r + 0.5, poly) for c in range(w)] for r in range(h)]
    )


def flood_fill_count(mask):
    """Number of 8-connected foreground components by explicit BFS."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    count = 0
    for r in range(h):
        for c in range(w):
            if not mask[r, c] or seen[r, c]:
                continue
            count += 1
            stack = [(r, c)]
            seen[r, c] = True
            while stack:
                rr, cc = stack.pop()
                for dr in (-1, 0, 1):
                    for dc in (-1, 0, 1):
                        a, b = rr + dr, cc + dc
                        if 0 <= a < h and 0 <= b < w and mask[a, b] and not seen[a, b]:
                            seen[a, b] = True
                            stack.append((a, b))
    return count
