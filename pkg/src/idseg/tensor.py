"""Numerical kernels for the segmentation network.

Tensors are plain ``numpy`` arrays in NHWC layout (batch, height, width,
channels). Every kernel is a pure function: forward kernels return a new
array, backward kernels return a :class:`KernelGrads`. Partial sums are
accumulated in float64 and results are stored in the dtype of the input, so
float32 training and float64 gradient checking share one code path.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

ACCUM = np.float64


class ShapeError(ValueError):
    """Raised when kernel operands have incompatible shapes."""


class KernelGrads(NamedTuple):
    d_input: np.ndarray
    d_weights: np.ndarray | None = None
    d_bias: np.ndarray | None = None


def _check_rank(name, a, rank):
    if a.ndim != rank:
        raise ShapeError(f"{name} must have rank {rank}, got shape {a.shape}")


def _conv_geometry(h, w, k, stride):
    if k not in (1, 3):
        raise ShapeError(f"unsupported kernel size {k}; expected 1 or 3")
    if stride not in (1, 2):
        raise ShapeError(f"unsupported stride {stride}; expected 1 or 2")
    pad = (k - 1) // 2
    ho = -(-h // stride)
    wo = -(-w // stride)
    # padded extent must cover index stride*(o-1) + k - 1
    pad_h = (pad, max(0, stride * (ho - 1) + k - h - pad))
    pad_w = (pad, max(0, stride * (wo - 1) + k - w - pad))
    return ho, wo, pad_h, pad_w


def _check_conv(x, weights, bias):
    _check_rank("input", x, 4)
    _check_rank("weights", weights, 4)
    kh, kw, cin, cout = weights.shape
    if kh != kw:
        raise ShapeError(f"kernel must be square, got {kh}x{kw}")
    if x.shape[3] != cin:
        raise ShapeError(
            f"input has {x.shape[3]} channels but weights expect {cin}"
        )
    if bias is not None and bias.shape != (cout,):
        raise ShapeError(f"bias shape {bias.shape} != ({cout},)")
    return kh, cin, cout


def _im2col(x, k, stride, ho, wo, pad_h, pad_w):
    n, _, _, c = x.shape
    xp = np.pad(x, ((0, 0), pad_h, pad_w, (0, 0)))
    cols = np.empty((n, ho, wo, k, k, c), dtype=ACCUM)
    for kr in range(k):
        for kc in range(k):
            cols[:, :, :, kr, kc, :] = xp[
                :, kr : kr + stride * ho : stride, kc : kc + stride * wo : stride, :
            ]
    return cols.reshape(n * ho * wo, k * k * c)


def conv2d_forward(x, weights, bias, stride=1):
    """Zero-padded ("same") 2-D convolution.

    ``out[n, i, j, f] = bias[f] + sum(x[n, s*i+kr-p, s*j+kc-p, c] * w[kr, kc, c, f])``
    with ``p = (k - 1) // 2``; reads outside the input contribute zero.
    """
    k, cin, cout = _check_conv(x, weights, bias)
    n, h, w, _ = x.shape
    ho, wo, pad_h, pad_w = _conv_geometry(h, w, k, stride)
    cols = _im2col(x, k, stride, ho, wo, pad_h, pad_w)
    out = cols @ weights.reshape(k * k * cin, cout).astype(ACCUM)
    out += bias
    return out.reshape(n, ho, wo, cout).astype(x.dtype)


def conv2d_backward(x, weights, stride, d_output):
    k, cin, cout = _check_conv(x, weights, None)
    n, h, w, _ = x.shape
    ho, wo, pad_h, pad_w = _conv_geometry(h, w, k, stride)
    if d_output.shape != (n, ho, wo, cout):
        raise ShapeError(
            f"d_output shape {d_output.shape} != forward output {(n, ho, wo, cout)}"
        )
    g = d_output.reshape(n * ho * wo, cout).astype(ACCUM)
    cols = _im2col(x, k, stride, ho, wo, pad_h, pad_w)
    d_w = (cols.T @ g).reshape(weights.shape)
    d_b = g.sum(axis=0)

    d_cols = (g @ weights.reshape(k * k * cin, cout).astype(ACCUM).T).reshape(
        n, ho, wo, k, k, cin
    )
    dxp = np.zeros((n, h + sum(pad_h), w + sum(pad_w), cin), dtype=ACCUM)
    for kr in range(k):
        for kc in range(k):
            dxp[
                :, kr : kr + stride * ho : stride, kc : kc + stride * wo : stride, :
            ] += d_cols[:, :, :, kr, kc, :]
    d_x = dxp[:, pad_h[0] : pad_h[0] + h, pad_w[0] : pad_w[0] + w, :]
    dt = x.dtype
    return KernelGrads(d_x.astype(dt), d_w.astype(dt), d_b.astype(dt))


def _check_tconv(x, weights, bias):
    _check_rank("input", x, 4)
    _check_rank("weights", weights, 4)
    if weights.shape[:2] != (3, 3):
        raise ShapeError(f"transposed conv kernel must be 3x3, got {weights.shape[:2]}")
    if x.shape[3] != weights.shape[2]:
        raise ShapeError(
            f"input has {x.shape[3]} channels but weights expect {weights.shape[2]}"
        )
    if bias is not None and bias.shape != (weights.shape[3],):
        raise ShapeError(f"bias shape {bias.shape} != ({weights.shape[3]},)")
    return weights.shape[2], weights.shape[3]


def tconv2d_forward(x, weights, bias, stride=2):
    """Stride-2 transposed convolution producing exactly twice the input size.

    Input pixel ``i`` and kernel tap ``k`` scatter ``x[i] * w[k]`` onto output
    position ``2*i + k - 1``; taps landing outside the output are dropped.
    """
    if stride != 2:
        raise ShapeError(f"transposed conv supports stride 2 only, got {stride}")
    cin, cout = _check_tconv(x, weights, bias)
    n, h, w, _ = x.shape
    taps = x.reshape(n * h * w, cin).astype(ACCUM) @ weights.transpose(
        2, 0, 1, 3
    ).reshape(cin, 9 * cout).astype(ACCUM)
    taps = taps.reshape(n, h, w, 3, 3, cout)
    # padded output index = true index + 1
    out = np.zeros((n, 2 * h + 2, 2 * w + 2, cout), dtype=ACCUM)
    for kr in range(3):
        for kc in range(3):
            out[:, kr : kr + 2 * h : 2, kc : kc + 2 * w : 2, :] += taps[
                :, :, :, kr, kc, :
            ]
    out = out[:, 1 : 2 * h + 1, 1 : 2 * w + 1, :] + bias
    return out.astype(x.dtype)


def tconv2d_backward(x, weights, d_output):
    cin, cout = _check_tconv(x, weights, None)
    n, h, w, _ = x.shape
    if d_output.shape != (n, 2 * h, 2 * w, cout):
        raise ShapeError(
            f"d_output shape {d_output.shape} != forward output {(n, 2 * h, 2 * w, cout)}"
        )
    gp = np.zeros((n, 2 * h + 2, 2 * w + 2, cout), dtype=ACCUM)
    gp[:, 1 : 2 * h + 1, 1 : 2 * w + 1, :] = d_output
    d_taps = np.empty((n, h, w, 3, 3, cout), dtype=ACCUM)
    for kr in range(3):
        for kc in range(3):
            d_taps[:, :, :, kr, kc, :] = gp[:, kr : kr + 2 * h : 2, kc : kc + 2 * w : 2, :]
    d_taps = d_taps.reshape(n * h * w, 9 * cout)
    w_mat = weights.transpose(2, 0, 1, 3).reshape(cin, 9 * cout).astype(ACCUM)
    x_mat = x.reshape(n * h * w, cin).astype(ACCUM)
    d_x = (d_taps @ w_mat.T).reshape(x.shape)
    d_w = (x_mat.T @ d_taps).reshape(cin, 3, 3, cout).transpose(1, 2, 0, 3)
    d_b = d_output.sum(axis=(0, 1, 2), dtype=ACCUM)
    dt = x.dtype
    return KernelGrads(d_x.astype(dt), d_w.astype(dt), d_b.astype(dt))


def _check_dense(x, weights, bias):
    _check_rank("input", x, 2)
    _check_rank("weights", weights, 2)
    if x.shape[1] != weights.shape[0]:
        raise ShapeError(
            f"inner dimensions differ: input {x.shape} vs weights {weights.shape}"
        )
    if bias is not None and bias.shape != (weights.shape[1],):
        raise ShapeError(f"bias shape {bias.shape} != ({weights.shape[1]},)")


def dense_forward(x, weights, bias):
    _check_dense(x, weights, bias)
    out = x.astype(ACCUM) @ weights.astype(ACCUM) + bias
    return out.astype(x.dtype)


def dense_backward(x, weights, d_output):
    _check_dense(x, weights, None)
    if d_output.shape != (x.shape[0], weights.shape[1]):
        raise ShapeError(f"d_output shape {d_output.shape} mismatches forward output")
    g = d_output.astype(ACCUM)
    d_x = g @ weights.astype(ACCUM).T
    d_w = x.astype(ACCUM).T @ g
    dt = x.dtype
    return KernelGrads(d_x.astype(dt), d_w.astype(dt), g.sum(axis=0).astype(dt))


def relu(x):
    return np.maximum(x, 0)


def relu_grad(x, d_output):
    # subgradient at exactly 0 is 0
    return np.where(x > 0, d_output, 0).astype(d_output.dtype)


def sigmoid(x):
    # split by sign so exp never overflows
    x = np.asarray(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_grad(y, d_output):
    """Backward of :func:`sigmoid` given its saved output ``y``."""
    return d_output * y * (1 - y)


def concat_channels(a, b):
    if a.shape[:-1] != b.shape[:-1]:
        raise ShapeError(f"cannot concatenate {a.shape} and {b.shape} on channels")
    return np.concatenate([a, b], axis=-1)


def concat_split_grad(d_output, ca, cb):
    if d_output.shape[-1] != ca + cb:
        raise ShapeError(f"gradient has {d_output.shape[-1]} channels, expected {ca + cb}")
    return d_output[..., :ca], d_output[..., ca:]


def broadcast_spatial(v, h, w):
    """Copy an ``n x d`` vector to every position of an ``n x h x w x d`` map."""
    _check_rank("input", v, 2)
    n, d = v.shape
    return np.ascontiguousarray(np.broadcast_to(v[:, None, None, :], (n, h, w, d)))


def broadcast_spatial_grad(d_output):
    return d_output.sum(axis=(1, 2), dtype=ACCUM).astype(d_output.dtype)
