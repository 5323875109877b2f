"""Input checks shared by the estimator and the CLI."""

from __future__ import annotations

import numbers

import numpy as np


def check_images(X, size=None, name="X"):
    """Return ``X`` as a float32 ``n x h x w x 3`` array with values in [0, 1]."""
    X = np.asarray(X)
    if X.ndim == 3:
        X = X[None]
    if X.ndim != 4 or X.shape[-1] != 3:
        raise ValueError(f"{name} must have shape (n, h, w, 3), got {X.shape}")
    if X.shape[0] == 0:
        raise ValueError(f"{name} is empty")
    if X.dtype == np.uint8:
        X = X.astype(np.float32) / 255.0
    else:
        X = X.astype(np.float32, copy=False)
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or infinite values")
    if X.min() < 0 or X.max() > 1:
        raise ValueError(f"{name} values must lie in [0, 1]")
    if size is not None and X.shape[1:3] != (size, size):
        raise ValueError(f"{name} must be {size}x{size} images, got {X.shape[1]}x{X.shape[2]}")
    return X


def check_masks(y, images, name="y"):
    """Return ``y`` as a float32 ``n x h x w x 1`` array of zeros and ones."""
    y = np.asarray(y)
    if y.ndim == 3:
        y = y[..., None]
    expected = images.shape[:3] + (1,)
    if y.shape != expected:
        raise ValueError(f"{name} must have shape {expected}, got {y.shape}")
    y = y.astype(np.float32)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError(f"{name} must be a binary mask")
    return y


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_fraction(value, name):
    if not isinstance(value, numbers.Real) or not 0 < value < 1:
        raise ValueError(f"{name} must lie in (0, 1), got {value!r}")
    return float(value)
