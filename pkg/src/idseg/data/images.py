from __future__ import annotations

import os

import numpy as np
from PIL import Image

from ..geometry import rasterize_polygon

SUPPORTED_FORMATS = {"PNG", "PPM"}  # Pillow reports PGM/PPM/PBM as "PPM"


class ImageLoadError(OSError):
    pass


def load_image(path):
    """Read a PNG or binary PPM/PGM as an ``h x w x 3`` float32 array in [0, 1]."""
    try:
        with Image.open(path) as img:
            if img.format not in SUPPORTED_FORMATS:
                raise ImageLoadError(f"{path}: unsupported image format {img.format}")
            img.load()
            if img.mode in ("1", "LA"):
                img = img.convert("L")
            elif img.mode in ("P", "PA"):
                img = img.convert("RGBA")
            if img.mode == "L":
                gray = np.asarray(img, dtype=np.uint8)
                arr = np.repeat(gray[:, :, None], 3, axis=2)
            elif img.mode in ("RGB", "RGBA"):
                arr = np.asarray(img, dtype=np.uint8)[:, :, :3]
            else:
                raise ImageLoadError(f"{path}: unsupported pixel mode {img.mode}")
    except ImageLoadError:
        raise
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageLoadError(f"{path}: cannot decode image ({exc})") from exc
    return arr.astype(np.float32) / 255.0


def to_uint8(image):
    arr = np.asarray(image)
    if arr.dtype == np.uint8:
        return arr
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def save_image(image, path):
    """Write an ``h x w x 3`` (or ``h x w``) image; format follows the suffix."""
    arr = to_uint8(image)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    ext = os.path.splitext(str(path))[1].lower()
    fmt = {".png": "PNG", ".ppm": "PPM", ".pgm": "PPM"}.get(ext)
    if fmt is None:
        raise ValueError(f"cannot write {path}: use .png, .ppm or .pgm")
    Image.fromarray(arr).save(path, format=fmt)


def resize_bilinear(image, out_h, out_w):
    """Bilinear resize with pixel-centre alignment.

    Output cell ``(r, c)`` samples the source at
    ``((r + 0.5) * h / out_h - 0.5, (c + 0.5) * w / out_w - 0.5)``, clamped
    to the valid range.
    """
    img = np.asarray(image)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"output size must be positive, got {out_h}x{out_w}")
    h, w = img.shape[:2]
    if (h, w) == (out_h, out_w):
        return img.copy()

    def axis(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        lo = np.floor(src).astype(np.intp)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    r0, r1, fr = axis(h, out_h)
    c0, c1, fc = axis(w, out_w)
    shape = (-1, 1) + (1,) * (img.ndim - 2)
    fr = fr.reshape(shape)
    fc = fc.reshape((1, -1) + (1,) * (img.ndim - 2))
    src = img.astype(np.float64)
    top = src[r0][:, c0] * (1 - fc) + src[r0][:, c1] * fc
    bottom = src[r1][:, c0] * (1 - fc) + src[r1][:, c1] * fc
    out = top * (1 - fr) + bottom * fr
    return out.astype(img.dtype if img.dtype.kind == "f" else np.float32)


def scale_quad(quad, sx, sy):
    """Scale every vertex: ``(x, y) -> (x * sx, y * sy)``; order is kept."""
    q = np.asarray(quad, dtype=np.float64)
    return q * np.array([sx, sy])


def rasterize_quad(quad, h, w):
    """``h x w x 1`` float32 mask of the quad (centre-in-polygon, edges inside)."""
    return rasterize_polygon(quad, h, w)[:, :, None].astype(np.float32)


def _bresenham(x0, y0, x1, y1):
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        yield x0, y0
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def draw_polygon(image, points, color=(0, 255, 0), width=2):
    """Copy of a uint8 image with the closed polygon drawn ``width`` px thick."""
    out = to_uint8(image).copy()
    pts = np.rint(np.asarray(points, dtype=np.float64)).astype(int)
    for (x0, y0), (x1, y1) in zip(pts, np.roll(pts, -1, axis=0)):
        for x, y in _bresenham(int(x0), int(y0), int(x1), int(y1)):
            r0, c0 = y - (width - 1) // 2, x - (width - 1) // 2
            r1, c1 = max(r0, 0), max(c0, 0)
            out[r1 : max(r0 + width, 0), c1 : max(c0 + width, 0)] = color
    return out
