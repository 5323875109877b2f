from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .images import ImageLoadError, load_image, rasterize_quad, resize_bilinear, scale_quad
from .manifest import DatasetRecord

NETWORK_SIZE = 128


@dataclass(frozen=True)
class Sample:
    image: np.ndarray  # size x size x 3, float32 in [0, 1]
    mask: np.ndarray  # size x size x 1, float32 in {0, 1}
    quad_scaled: np.ndarray  # 4 x 2, network coordinates
    record: DatasetRecord
    original_size: tuple[int, int]  # (h, w) of the source image


def make_sample(record, data_root, size=NETWORK_SIZE):
    """Load, resize and rasterize one manifest row.

    The image is resized to ``size x size`` without preserving aspect ratio
    and the ground-truth quad is scaled by the same per-axis factors.
    """
    path = os.path.join(data_root, record.path)
    try:
        image = load_image(path)
    except OSError as exc:
        raise ImageLoadError(f"record {record.path!r}: {exc}") from exc
    h, w = image.shape[:2]
    quad = scale_quad(record.quad_array, size / w, size / h)
    return Sample(
        image=resize_bilinear(image, size, size),
        mask=rasterize_quad(quad, size, size),
        quad_scaled=quad,
        record=record,
        original_size=(h, w),
    )


def load_samples(records, data_root, size=NETWORK_SIZE):
    return [make_sample(rec, data_root, size) for rec in records]


def stack_samples(samples):
    """``(images n x s x s x 3, masks n x s x s x 1)`` float32 arrays."""
    if not samples:
        raise ValueError("no samples to stack")
    return (
        np.stack([s.image for s in samples]).astype(np.float32),
        np.stack([s.mask for s in samples]).astype(np.float32),
    )


def batches(samples, batch_size, seed=None, shuffle=False):
    """Yield ``(images, masks)`` batches; the final batch may be short."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(len(samples))
    if shuffle:
        order = np.random.default_rng(seed).permutation(len(samples))
    for start in range(0, len(order), batch_size):
        yield stack_samples([samples[i] for i in order[start : start + batch_size]])
