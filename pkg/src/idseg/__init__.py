"""Identity-document detection by semantic segmentation.

A small encoder/decoder CNN (NumPy kernels, trained from scratch with Adam)
predicts a per-pixel document probability map; the largest convex
four-cornered contour of the thresholded map is the detected document.
"""

from .estimator import DocumentDetector
from .evaluation import (
    EvalReport,
    accuracy_vs_iou_curve,
    bench_inference,
    detect_single,
    evaluate,
)

__version__ = "0.1.0"

__all__ = [
    "DocumentDetector",
    "EvalReport",
    "accuracy_vs_iou_curve",
    "bench_inference",
    "detect_single",
    "evaluate",
]
