from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """Moment estimates for Adam, keyed like ``Model.params``.

    Defaults match the Keras built-in optimizer.
    """

    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(model, state, grads):
    """Apply one bias-corrected Adam update in place and return ``(model, state)``.

    ``grads`` maps layer names to objects with ``d_weights``/``d_bias``
    (as returned by :func:`idseg.nn.backward`).
    """
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, tensors in model.params.items():
        g = grads[name]
        for i, grad in enumerate((g.d_weights, g.d_bias)):
            param = tensors[i]
            if grad.shape != param.shape:
                raise ValueError(
                    f"{name}[{i}]: gradient shape {grad.shape} != parameter {param.shape}"
                )
            key = (name, i)
            if key not in state.m:
                state.m[key] = np.zeros(param.shape, dtype=np.float64)
                state.v[key] = np.zeros(param.shape, dtype=np.float64)
            grad = grad.astype(np.float64)
            m = state.m[key]
            v = state.v[key]
            m *= b1
            m += (1 - b1) * grad
            v *= b2
            v += (1 - b2) * grad * grad
            update = state.lr * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
            tensors[i] = (param - update).astype(param.dtype)
    model.version += 1
    return model, state
