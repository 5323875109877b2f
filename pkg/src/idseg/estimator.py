from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import nn
from .evaluation import Detection, accuracy_vs_iou_curve, detect_single
from .geometry import quad_iou
from .validation import (
    check_fraction,
    check_images,
    check_masks,
    check_positive_int,
)


class DocumentDetector(BaseEstimator):
    """Segmentation-based document detector.

    ``fit`` trains the encoder/decoder network on images and binary
    document masks; ``predict_proba`` returns per-pixel document
    probabilities and ``predict`` returns one quadrilateral (or ``None``) per
    image.

    Parameters
    ----------
    input_size : int, default=128
        Side of the square network input. Must be divisible by
        ``2 ** len(encoder)``.
    encoder, dense, decoder : tuple of int
        Channel widths of the stride-2 encoder convs, the dense decision
        head and the transposed-conv decoder. The defaults give the
        reference network with 214,593 trainable parameters.
    epochs : int, default=60
    batch_size : int, default=32
    learning_rate : float, default=0.001
        Adam step size (beta1=0.9, beta2=0.999, epsilon=1e-7).
    random_state : int, default=42
        Seeds weight initialisation and the per-epoch shuffles.
    threshold : float, default=0.5
        Probability at or above which a pixel counts as document.
    min_area_frac : float, default=0.01
        Smallest accepted quad, as a fraction of the network input area.
    epsilon_frac : float, default=0.02
        Contour simplification tolerance as a fraction of its perimeter.
    max_epsilon_frac : float or None, default=0.05
        Upper bound when the tolerance is loosened for contours that keep
        more than four corners; ``None`` uses ``epsilon_frac`` only.

    Attributes
    ----------
    model_ : idseg.nn.Model
    train_log_ : idseg.nn.TrainLog
    """

    def __init__(
        self,
        input_size=128,
        encoder=(16, 24, 32, 48),
        dense=(48, 16),
        decoder=(32, 24, 16, 8),
        epochs=60,
        batch_size=32,
        learning_rate=0.001,
        random_state=42,
        threshold=0.5,
        min_area_frac=0.01,
        epsilon_frac=0.02,
        max_epsilon_frac=0.05,
    ):
        self.input_size = input_size
        self.encoder = encoder
        self.dense = dense
        self.decoder = decoder
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.random_state = random_state
        self.threshold = threshold
        self.min_area_frac = min_area_frac
        self.epsilon_frac = epsilon_frac
        self.max_epsilon_frac = max_epsilon_frac

    def _config(self):
        size = check_positive_int(self.input_size, "input_size")
        return nn.segmentation_config(
            (size, size, 3), tuple(self.encoder), tuple(self.dense), tuple(self.decoder)
        )

    def fit(self, X, y, validation_data=None, callback=None):
        """Train from scratch on images ``X`` and masks ``y``.

        ``validation_data`` is an optional ``(X_val, y_val)`` pair scored at
        the end of every epoch; the training set is scored when omitted.
        """
        config = self._config()
        X = check_images(X, config.input_size[0])
        y = check_masks(y, X)
        if validation_data is None:
            X_val, y_val = X, y
        else:
            X_val = check_images(validation_data[0], config.input_size[0], "X_val")
            y_val = check_masks(validation_data[1], X_val, "y_val")
        epochs = check_positive_int(self.epochs, "epochs", minimum=0)
        batch_size = check_positive_int(self.batch_size, "batch_size")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate!r}")
        seed = check_positive_int(self.random_state, "random_state", minimum=0)

        model = nn.init_model(config, seed)
        state = nn.AdamState(lr=float(self.learning_rate))
        self.model_, self.train_log_ = nn.train(
            model, (X, y), (X_val, y_val), epochs, batch_size,
            seed=seed + 1, state=state, callback=callback,
        )
        return self

    @classmethod
    def from_model(cls, model, **params):
        """Wrap an already-trained :class:`idseg.nn.Model`."""
        enc = [s.units for s in model.config.layers if s.kind == "conv"]
        dense = [s.units for s in model.config.layers if s.kind == "dense"]
        dec = [s.units for s in model.config.layers if s.kind == "tconv"]
        est = cls(
            input_size=model.config.input_size[0],
            encoder=tuple(enc), dense=tuple(dense), decoder=tuple(dec), **params,
        )
        est.model_ = model
        est.train_log_ = nn.TrainLog()
        return est

    @classmethod
    def load(cls, path, **params):
        return cls.from_model(nn.load_model(path), **params)

    def save(self, path):
        check_is_fitted(self, "model_")
        return nn.save_model(self.model_, path)

    def predict_proba(self, X):
        """Document probability maps, ``n x s x s x 1``."""
        check_is_fitted(self, "model_")
        X = check_images(X, self.model_.config.input_size[0])
        out = [
            nn.forward(self.model_, X[i : i + self.batch_size])[0]
            for i in range(0, len(X), self.batch_size)
        ]
        return np.concatenate(out)

    def predict(self, X):
        """One quad per image (``4 x 2`` in that image's pixels) or ``None``.

        ``X`` may be an array of images or a list of differently sized ones;
        each is resized to the network input internally.
        """
        check_is_fitted(self, "model_")
        check_fraction(self.threshold, "threshold")
        images = [X] if getattr(X, "ndim", None) == 3 else X
        return [
            detect_single(
                self.model_, check_images(img)[0], self.threshold,
                self.min_area_frac, self.epsilon_frac, self.max_epsilon_frac,
            )[0]
            for img in images
        ]

    def score(self, X, quads, iou_threshold=0.5):
        """Fraction of images whose predicted quad reaches ``iou_threshold``."""
        predicted = self.predict(X)
        detections = [
            Detection(None, p, 0.0 if p is None else quad_iou(p, q), 0.0)
            for p, q in zip(predicted, quads)
        ]
        return accuracy_vs_iou_curve(detections, [iou_threshold])[0][1]
