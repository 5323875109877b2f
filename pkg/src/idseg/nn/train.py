from __future__ import annotations

import csv
import logging
from dataclasses import astuple, dataclass, fields

import numpy as np

from .model import backward, bce_loss, confusion_counts, forward, metrics_from_counts
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float
    precision: float
    recall: float
    val_loss: float
    val_accuracy: float
    val_precision: float
    val_recall: float


class TrainLog(list):
    """Epoch-end metrics, one :class:`EpochRecord` per completed epoch."""

    columns = tuple(f.name for f in fields(EpochRecord))

    def column(self, name):
        return [getattr(row, name) for row in self]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self:
                writer.writerow([row.epoch] + [repr(float(v)) for v in astuple(row)[1:]])


def evaluate_batches(model, images, masks, batch_size=32):
    """Mean BCE loss plus pixel accuracy/precision/recall over a dataset."""
    counts = np.zeros(4, dtype=np.int64)
    loss_sum = 0.0
    n = len(images)
    for start in range(0, n, batch_size):
        x = images[start : start + batch_size]
        y = masks[start : start + batch_size]
        prob, _ = forward(model, x)
        loss, _ = bce_loss(prob, y)
        loss_sum += loss * len(x)
        counts += confusion_counts(prob, y)
    return (loss_sum / n, *metrics_from_counts(*counts.tolist()))


def train(
    model,
    train_set,
    val_set,
    epochs=60,
    batch_size=32,
    seed=42,
    state=None,
    callback=None,
):
    """Mini-batch Adam on mean pixel BCE.

    ``train_set`` and ``val_set`` are ``(images, masks)`` array pairs. The
    training order is reshuffled every epoch from a generator seeded with
    ``seed``; the last short batch is kept. Train metrics are accumulated
    over the epoch's batches, validation metrics are computed after the
    epoch. Returns ``(model, log)``; ``model`` is updated in place.
    """
    x_train, y_train = train_set
    x_val, y_val = val_set
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValueError("training and validation sets must be non-empty")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    state = AdamState() if state is None else state
    rng = np.random.default_rng(seed)
    log = TrainLog()
    n = len(x_train)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        counts = np.zeros(4, dtype=np.int64)
        loss_sum = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            x = x_train[idx]
            y = y_train[idx]
            prob, cache = forward(model, x, keep_cache=True)
            loss, d_prob = bce_loss(prob, y)
            counts += confusion_counts(prob, y)
            loss_sum += loss * len(idx)
            adam_step(model, state, backward(model, cache, d_prob))
        train_metrics = metrics_from_counts(*counts.tolist())
        val = evaluate_batches(model, x_val, y_val, batch_size)
        record = EpochRecord(epoch, loss_sum / n, *train_metrics, *val)
        log.append(record)
        logger.info(
            "epoch %d loss %.4f acc %.4f val_loss %.4f val_acc %.4f val_recall %.4f",
            epoch, record.loss, record.accuracy, record.val_loss,
            record.val_accuracy, record.val_recall,
        )
        if callback is not None:
            callback(record)
    return model, log
