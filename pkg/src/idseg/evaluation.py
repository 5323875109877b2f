"""End-to-end detection, accuracy-versus-IoU curves and latency benchmarks."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import nn
from .data import ImageLoadError, load_image, rasterize_quad, resize_bilinear, scale_quad
from .geometry import extract_contours, quad_iou, select_document_quad, threshold_map


def iou_thresholds(step=0.05):
    """Grid ``0, step, 2*step, ...`` strictly below 1."""
    if not 0 < step <= 1:
        raise ValueError(f"IoU step must lie in (0, 1], got {step}")
    n = int(np.ceil(1.0 / step - 1e-9))
    return tuple(round(step * i, 10) for i in range(n))


DEFAULT_THRESHOLDS = iou_thresholds(0.05)


def _predict(model, batch):
    if isinstance(model, nn.Model):
        return nn.forward(model, batch)[0]
    return np.asarray(model(batch))


def detect_single(
    model,
    image,
    threshold=0.5,
    min_area_frac=0.01,
    epsilon_frac=0.02,
    max_epsilon_frac=0.05,
):
    """Locate the document in one ``h x w x 3`` image.

    ``model`` is a :class:`idseg.nn.Model` or any callable mapping an
    ``n x s x s x 3`` batch to ``n x s x s x 1`` probabilities. Returns
    ``(quad or None, prob_map)`` with the quad in ``h x w`` pixel coordinates.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or 0 in image.shape:
        raise ValueError(f"expected an h x w x 3 image, got shape {image.shape}")
    h, w = image.shape[:2]
    size = model.config.input_size[0] if isinstance(model, nn.Model) else 128
    small = resize_bilinear(image.astype(np.float32), size, size)
    prob = _predict(model, small[None])[0]
    mask = threshold_map(prob, threshold)
    quad = select_document_quad(
        extract_contours(mask),
        size,
        size,
        min_area_frac,
        epsilon_frac,
        max_epsilon_frac=max_epsilon_frac,
    )
    if quad is not None:
        quad = scale_quad(quad, w / size, h / size)
    return quad, prob


@dataclass
class Detection:
    record: object
    predicted: np.ndarray | None
    iou: float
    latency_ms: float


@dataclass
class EvalReport:
    detections: list
    curve: list
    pixel: tuple
    timing: tuple
    failures: list = field(default_factory=list)

    def accuracy_at(self, threshold):
        return accuracy_vs_iou_curve(self.detections, [threshold])[0][1]


def accuracy_vs_iou_curve(detections, thresholds):
    """Fraction of detections with ``iou >= t`` for each threshold ``t``.

    Missing predictions carry ``iou = 0`` and therefore count only at
    ``t = 0``.
    """
    if not detections:
        raise ValueError("cannot build a curve from zero detections")
    thresholds = list(thresholds)
    if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be strictly increasing")
    ious = np.array([d.iou for d in detections])
    return [(float(t), float(np.mean(ious >= t))) for t in thresholds]


def timing_stats(latencies_ms):
    lat = np.asarray(latencies_ms, dtype=np.float64)
    if lat.size == 0:
        return (float("nan"),) * 3
    return float(lat.mean()), float(np.percentile(lat, 50)), float(np.percentile(lat, 95))


def evaluate(
    model, records, data_root, thresholds=DEFAULT_THRESHOLDS, detect_kwargs=None
):
    """Detect every record's document and score it against the ground truth.

    IoU is measured in original-image coordinates; pixel metrics compare the
    network-resolution probability map with the rasterized ground truth.
    Records whose image cannot be loaded are listed in ``failures`` and left
    out of every aggregate.
    """
    detect_kwargs = detect_kwargs or {}
    size = model.config.input_size[0] if isinstance(model, nn.Model) else 128
    detections, failures = [], []
    counts = np.zeros(4, dtype=np.int64)
    for rec in records:
        try:
            image = load_image(os.path.join(data_root, rec.path))
        except ImageLoadError as exc:
            failures.append((rec, str(exc)))
            continue
        h, w = image.shape[:2]
        start = time.perf_counter()
        quad, prob = detect_single(model, image, **detect_kwargs)
        latency = (time.perf_counter() - start) * 1e3
        truth = rec.quad_array
        iou = 0.0 if quad is None else quad_iou(quad, truth)
        detections.append(Detection(rec, quad, iou, latency))
        target = rasterize_quad(scale_quad(truth, size / w, size / h), size, size)
        counts += nn.confusion_counts(prob, target, detect_kwargs.get("threshold", 0.5))
    if not detections:
        raise ValueError(f"no record could be evaluated ({len(failures)} failures)")
    return EvalReport(
        detections=detections,
        curve=accuracy_vs_iou_curve(detections, thresholds),
        pixel=nn.metrics_from_counts(*counts.tolist()),
        timing=timing_stats([d.latency_ms for d in detections]),
        failures=failures,
    )


def bench_inference(model, image_size=128, iterations=100, seed=0):
    """Single-threaded wall-clock time of detection (forward plus
    post-processing) on a fixed random image; returns ``(mean, p50, p95)``
    in milliseconds. One warm-up pass is discarded."""
    if iterations < 10:
        raise ValueError("iterations must be >= 10")
    image = np.random.default_rng(seed).random((image_size, image_size, 3), dtype=np.float32)
    times = []
    with threadpool_limits(limits=1):
        detect_single(model, image)
        for _ in range(iterations):
            start = time.perf_counter()
            detect_single(model, image)
            times.append((time.perf_counter() - start) * 1e3)
    return timing_stats(times)
