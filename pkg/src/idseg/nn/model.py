"""Parameters, forward/backward passes, loss and pixel metrics."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .. import tensor as T
from .config import ModelConfig

_model_ids = itertools.count()

BCE_EPS = 1e-7


class StaleCacheError(RuntimeError):
    """Raised when backward is given a cache that does not match the model."""


@dataclass
class Model:
    config: ModelConfig
    params: dict[str, list[np.ndarray]]
    version: int = 0
    uid: int = field(default_factory=lambda: next(_model_ids))

    @property
    def param_count(self):
        return sum(w.size + b.size for w, b in self.params.values())

    @property
    def dtype(self):
        return next(iter(self.params.values()))[0].dtype

    def copy(self):
        params = {k: [w.copy(), b.copy()] for k, (w, b) in self.params.items()}
        return Model(self.config, params)


def _fans(w_shape):
    if len(w_shape) == 2:
        return w_shape[0], w_shape[1]
    kh, kw, cin, cout = w_shape
    return kh * kw * cin, kh * kw * cout


def init_model(config, seed=0, dtype=np.float32):
    """Glorot-uniform weights, zero biases, fully determined by ``seed``."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, (w_shape, b_shape) in config.param_shapes().items():
        fan_in, fan_out = _fans(w_shape)
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=w_shape).astype(dtype)
        params[name] = [w, np.zeros(b_shape, dtype=dtype)]
    return Model(config, params)


def zero_model(config, dtype=np.float32):
    params = {
        name: [np.zeros(w, dtype=dtype), np.zeros(b, dtype=dtype)]
        for name, (w, b) in config.param_shapes().items()
    }
    return Model(config, params)


def _activate(x, activation):
    if activation == "relu":
        return T.relu(x)
    if activation == "sigmoid":
        return T.sigmoid(x)
    return x


def forward(model, batch, keep_cache=False):
    """Run the network on an ``n x H x W x C`` batch.

    Returns ``(prob_map, cache)`` where ``cache`` is ``None`` unless
    ``keep_cache`` is set.
    """
    config = model.config
    batch = np.asarray(batch)
    if batch.ndim != 4 or batch.shape[1:] != tuple(config.input_size):
        raise T.ShapeError(
            f"expected batch of shape (n, {', '.join(map(str, config.input_size))}), "
            f"got {batch.shape}"
        )
    acts = {"input": batch.astype(model.dtype, copy=False)}
    for spec in config.layers:
        x = acts[spec.inputs[0]]
        if spec.kind in ("conv", "output_conv"):
            w, b = model.params[spec.name]
            y = T.conv2d_forward(x, w, b, spec.stride)
        elif spec.kind == "tconv":
            w, b = model.params[spec.name]
            y = T.tconv2d_forward(x, w, b)
        elif spec.kind == "dense":
            w, b = model.params[spec.name]
            y = T.dense_forward(x, w, b)
        elif spec.kind == "flatten":
            y = x.reshape(x.shape[0], -1)
        elif spec.kind == "broadcast":
            ref = acts[spec.inputs[1]]
            y = T.broadcast_spatial(x, ref.shape[1], ref.shape[2])
        else:
            y = T.concat_channels(x, acts[spec.inputs[1]])
        acts[spec.name] = _activate(y, spec.activation)
    prob = acts[config.layers[-1].name]
    if not keep_cache:
        return prob, None
    return prob, {"model": model.uid, "version": model.version, "acts": acts}


def backward(model, cache, d_prob):
    """Reverse pass; returns ``{layer: KernelGrads}`` for trainable layers."""
    if cache is None or "acts" not in cache:
        raise StaleCacheError("backward needs a cache from forward(..., keep_cache=True)")
    if cache["model"] != model.uid or cache["version"] != model.version:
        raise StaleCacheError("cache was produced by a different model state")
    acts = cache["acts"]
    grads_out = {model.config.layers[-1].name: d_prob}
    grads = {}

    def push(name, g):
        if name in grads_out:
            grads_out[name] = grads_out[name] + g
        else:
            grads_out[name] = g

    for spec in reversed(model.config.layers):
        g = grads_out.pop(spec.name, None)
        if g is None:
            continue
        y = acts[spec.name]
        if spec.activation == "relu":
            g = T.relu_grad(y, g)
        elif spec.activation == "sigmoid":
            g = T.sigmoid_grad(y, g)
        src = spec.inputs[0]
        x = acts[src]
        if spec.kind in ("conv", "output_conv"):
            kg = T.conv2d_backward(x, model.params[spec.name][0], spec.stride, g)
        elif spec.kind == "tconv":
            kg = T.tconv2d_backward(x, model.params[spec.name][0], g)
        elif spec.kind == "dense":
            kg = T.dense_backward(x, model.params[spec.name][0], g)
        elif spec.kind == "flatten":
            push(src, g.reshape(x.shape))
            continue
        elif spec.kind == "broadcast":
            push(src, T.broadcast_spatial_grad(g))
            continue
        else:
            ga, gb = T.concat_split_grad(g, x.shape[-1], acts[spec.inputs[1]].shape[-1])
            push(src, ga)
            push(spec.inputs[1], gb)
            continue
        grads[spec.name] = kg
        if src != "input":
            push(src, kg.d_input)
    # layers whose output never received a gradient still get zeros
    for name, (w, b) in model.params.items():
        if name not in grads:
            grads[name] = T.KernelGrads(None, np.zeros_like(w), np.zeros_like(b))
    return grads


def bce_loss(prob, target):
    """Mean binary cross-entropy with probabilities clamped to [1e-7, 1-1e-7].

    Returns ``(loss, d_prob)``; the gradient is zero where clamping is active.
    """
    prob = np.asarray(prob)
    target = np.asarray(target)
    if prob.shape != target.shape:
        raise T.ShapeError(f"prob {prob.shape} and target {target.shape} differ")
    p64 = prob.astype(np.float64)
    y = target.astype(np.float64)
    p = np.clip(p64, BCE_EPS, 1 - BCE_EPS)
    loss = -np.mean(y * np.log(p) + (1 - y) * np.log1p(-p))
    inside = (p64 > BCE_EPS) & (p64 < 1 - BCE_EPS)
    d = np.where(inside, (p - y) / (p * (1 - p)), 0.0) / prob.size
    return float(loss), d.astype(prob.dtype)


def confusion_counts(prob, target, threshold=0.5):
    pred = np.asarray(prob) >= threshold
    truth = np.asarray(target) >= 0.5
    tp = int(np.count_nonzero(pred & truth))
    fp = int(np.count_nonzero(pred & ~truth))
    fn = int(np.count_nonzero(~pred & truth))
    tn = int(pred.size - tp - fp - fn)
    return tp, fp, fn, tn


def metrics_from_counts(tp, fp, fn, tn):
    """``(accuracy, precision, recall)``; an empty denominator scores 1.0."""
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 1.0
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    return accuracy, precision, recall


def pixel_metrics(prob, target, threshold=0.5):
    prob = np.asarray(prob)
    if prob.shape != np.shape(target):
        raise T.ShapeError(f"prob {prob.shape} and target {np.shape(target)} differ")
    return metrics_from_counts(*confusion_counts(prob, target, threshold))
