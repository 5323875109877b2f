"""Seeded synthetic document scenes written in the manifest format.

Each scene is a noisy solid background with optional distractor rectangles
and one perspective-jittered "document": a contrasting quad carrying dark
horizontal strokes that stand in for text lines.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..geometry import is_convex, polygon_area, rasterize_polygon
from .images import save_image
from .manifest import DatasetRecord, write_manifest

TRAIN_PART = 1
TEST_PART = 2


@dataclass(frozen=True)
class SynthParams:
    count_train: int = 512
    count_test: int = 128
    image_size: int = 128
    seed: int = 42
    clutter_level: float = 0.5

    def __post_init__(self):
        if self.count_train < 0 or self.count_test < 0:
            raise ValueError("image counts must be >= 0")
        if self.image_size < 32:
            raise ValueError("image_size must be >= 32")
        if not 0.0 <= self.clutter_level <= 1.0:
            raise ValueError("clutter_level must lie in [0, 1]")


def _luma(rgb):
    return 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]


def _contrasting_color(rng, background, min_gap=70.0):
    for _ in range(100):
        color = rng.uniform(0, 255, size=3)
        if abs(_luma(color) - _luma(background)) >= min_gap:
            return color
    return 255.0 - background


def _homography(quad):
    """3x3 matrix mapping the unit square (u, v) corners onto ``quad``."""
    src = ((0, 0), (1, 0), (1, 1), (0, 1))
    a, rhs = [], []
    for (u, v), (x, y) in zip(src, quad):
        a.append([u, v, 1, 0, 0, 0, -u * x, -v * x])
        a.append([0, 0, 0, u, v, 1, -u * y, -v * y])
        rhs += [x, y]
    h = np.linalg.solve(np.array(a, dtype=np.float64), np.array(rhs))
    return np.append(h, 1.0).reshape(3, 3)


def _document_quad(rng, size):
    min_area = 0.06 * size * size
    while True:
        w = rng.uniform(0.25, 0.70) * size
        h = w * rng.uniform(0.63, 1.0)
        jx, jy = 0.1 * w, 0.1 * h
        cx = rng.uniform(w / 2 + jx + 1, size - w / 2 - jx - 1)
        cy = rng.uniform(h / 2 + jy + 1, size - h / 2 - jy - 1)
        base = np.array(
            [[cx - w / 2, cy - h / 2], [cx + w / 2, cy - h / 2],
             [cx + w / 2, cy + h / 2], [cx - w / 2, cy + h / 2]]
        )
        jitter = rng.uniform(-1, 1, size=(4, 2)) * [jx, jy]
        quad = np.round(base + jitter, 3)
        if is_convex(quad) and polygon_area(quad) >= min_area:
            return quad


def render_scene(rng, size, clutter_level):
    """Return ``(uint8 image size x size x 3, quad 4 x 2)``."""
    background = rng.uniform(0, 255, size=3)
    img = np.empty((size, size, 3), dtype=np.float64)
    img[:] = background
    n_distractors = int(rng.integers(0, int(round(8 * clutter_level)) + 1))
    for _ in range(n_distractors):
        dw, dh = rng.uniform(0.05, 0.3, size=2) * size
        x0, y0 = rng.uniform(0, size - dw), rng.uniform(0, size - dh)
        img[int(y0) : int(y0 + dh), int(x0) : int(x0 + dw)] = rng.uniform(0, 255, size=3)

    quad = _document_quad(rng, size)
    inside = rasterize_polygon(quad, size, size)
    fill = _contrasting_color(rng, background)
    img[inside] = fill

    # map document pixels back to (u, v) to lay out text strokes
    rows, cols = np.nonzero(inside)
    pts = np.stack([cols + 0.5, rows + 0.5, np.ones(len(rows))])
    uvw = np.linalg.inv(_homography(quad)) @ pts
    u, v = uvw[0] / uvw[2], uvw[1] / uvw[2]
    ink = np.clip(fill * rng.uniform(0.1, 0.4), 0, 255)
    for _ in range(int(rng.integers(3, 8))):
        v0 = rng.uniform(0.12, 0.85)
        thick = rng.uniform(0.03, 0.06)
        u0 = rng.uniform(0.06, 0.4)
        u1 = rng.uniform(u0 + 0.15, 0.94)
        stroke = (v >= v0) & (v < v0 + thick) & (u >= u0) & (u < u1)
        img[rows[stroke], cols[stroke]] = ink

    amp = 8.0 + 30.0 * clutter_level
    img += rng.uniform(-amp, amp, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8), quad


def generate_synthetic(params, out_dir):
    """Write the scenes and ``manifest.csv`` under ``out_dir``; return the manifest path.

    Train scenes get ``part = 1``, test scenes ``part = 2``. Output is a pure
    function of ``params``.
    """
    image_dir = os.path.join(out_dir, "images")
    os.makedirs(image_dir, exist_ok=True)
    rng = np.random.default_rng(params.seed)
    records = []
    splits = (("train", TRAIN_PART, params.count_train), ("test", TEST_PART, params.count_test))
    for split, part, count in splits:
        for i in range(count):
            image, quad = render_scene(rng, params.image_size, params.clutter_level)
            rel = f"images/{split}_{i:05d}.png"
            save_image(image, os.path.join(out_dir, rel))
            records.append(DatasetRecord(rel, tuple(map(tuple, quad.tolist())), part, "synth"))
    manifest = os.path.join(out_dir, "manifest.csv")
    write_manifest(records, manifest)
    return manifest
