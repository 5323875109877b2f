"""The segmentation network: config, passes, loss, optimizer, training, I/O."""

from .config import (
    ConfigError,
    LayerSpec,
    ModelConfig,
    config_from_param_shapes,
    reference_config,
    segmentation_config,
)
from .model import (
    Model,
    StaleCacheError,
    backward,
    bce_loss,
    confusion_counts,
    forward,
    init_model,
    metrics_from_counts,
    pixel_metrics,
    zero_model,
)
from .optim import AdamState, adam_step
from .serialize import (
    BadMagicError,
    ChecksumError,
    ModelFormatError,
    TruncatedFileError,
    VersionError,
    load_model,
    save_model,
)
from .train import EpochRecord, TrainLog, evaluate_batches, train

__all__ = [
    "AdamState",
    "BadMagicError",
    "ChecksumError",
    "ConfigError",
    "EpochRecord",
    "LayerSpec",
    "Model",
    "ModelConfig",
    "ModelFormatError",
    "StaleCacheError",
    "TrainLog",
    "TruncatedFileError",
    "VersionError",
    "adam_step",
    "backward",
    "bce_loss",
    "config_from_param_shapes",
    "confusion_counts",
    "evaluate_batches",
    "forward",
    "init_model",
    "load_model",
    "metrics_from_counts",
    "pixel_metrics",
    "reference_config",
    "save_model",
    "segmentation_config",
    "train",
    "zero_model",
]
