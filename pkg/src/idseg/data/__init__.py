"""Dataset manifests, image I/O, ground-truth masks and synthetic scenes."""

from .images import (
    draw_polygon,
    ImageLoadError,
    load_image,
    rasterize_quad,
    resize_bilinear,
    save_image,
    scale_quad,
)
from .manifest import (
    COLUMNS,
    DatasetRecord,
    ManifestError,
    format_manifest,
    parse_manifest,
    read_manifest,
    write_manifest,
)
from .samples import NETWORK_SIZE, Sample, batches, load_samples, make_sample, stack_samples
from .synth import TEST_PART, TRAIN_PART, SynthParams, generate_synthetic, render_scene
