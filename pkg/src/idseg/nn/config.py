"""Layer specifications and the wiring graph of the segmentation network."""

from __future__ import annotations

from dataclasses import dataclass, field

PARAM_KINDS = ("conv", "tconv", "dense", "output_conv")
KINDS = PARAM_KINDS + ("flatten", "broadcast", "concat")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    """One node of the network graph.

    ``inputs`` names the layers feeding this node (``"input"`` is the image
    batch). For ``concat`` the first input lands in the leading channels.
    """

    name: str
    kind: str
    inputs: tuple[str, ...]
    units: int = 0
    kernel: int = 0
    stride: int = 1
    activation: str = "linear"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")


@dataclass(frozen=True)
class ModelConfig:
    input_size: tuple[int, int, int]
    layers: tuple[LayerSpec, ...] = field(default_factory=tuple)

    def output_shapes(self):
        """Per-layer output shape (without batch), validating the wiring."""
        h, w, c = self.input_size
        shapes = {"input": (h, w, c)}
        for spec in self.layers:
            for src in spec.inputs:
                if src not in shapes:
                    raise ConfigError(f"{spec.name}: input {src!r} is not computed earlier")
            src = shapes[spec.inputs[0]]
            if spec.kind in ("conv", "output_conv"):
                s = spec.stride
                shapes[spec.name] = (-(-src[0] // s), -(-src[1] // s), spec.units)
            elif spec.kind == "tconv":
                shapes[spec.name] = (2 * src[0], 2 * src[1], spec.units)
            elif spec.kind == "flatten":
                shapes[spec.name] = (src[0] * src[1] * src[2],)
            elif spec.kind == "dense":
                if len(src) != 1:
                    raise ConfigError(f"{spec.name}: dense layer needs a flat input")
                shapes[spec.name] = (spec.units,)
            elif spec.kind == "broadcast":
                ref = shapes[spec.inputs[1]]
                shapes[spec.name] = (ref[0], ref[1], src[0])
            elif spec.kind == "concat":
                other = shapes[spec.inputs[1]]
                if src[:2] != other[:2]:
                    raise ConfigError(
                        f"{spec.name}: spatial mismatch {src[:2]} vs {other[:2]}"
                    )
                shapes[spec.name] = (src[0], src[1], src[2] + other[2])
        return shapes

    def param_shapes(self):
        """``{layer name: (weight shape, bias shape)}`` for trainable layers."""
        shapes = self.output_shapes()
        out = {}
        for spec in self.layers:
            if spec.kind not in PARAM_KINDS:
                continue
            src = shapes[spec.inputs[0]]
            if spec.kind == "dense":
                out[spec.name] = ((src[0], spec.units), (spec.units,))
            else:
                out[spec.name] = ((spec.kernel, spec.kernel, src[2], spec.units), (spec.units,))
        return out

    @property
    def param_count(self):
        total = 0
        for w_shape, b_shape in self.param_shapes().values():
            n = 1
            for d in w_shape:
                n *= d
            total += n + b_shape[0]
        return total

    @property
    def bottleneck_size(self):
        flat = next(s for s in self.layers if s.kind == "flatten")
        return self.output_shapes()[flat.inputs[0]][:2]


def segmentation_config(
    input_size=(128, 128, 3),
    encoder=(16, 24, 32, 48),
    dense=(48, 16),
    decoder=(32, 24, 16, 8),
):
    """Build the encoder / decision-head / decoder topology.

    Each encoder stage is a stride-2 3x3 conv. The bottleneck is flattened,
    passed through the dense head, broadcast back over the bottleneck grid
    and concatenated after the last encoder map. Decoder stage ``i`` is a
    stride-2 transposed conv whose output is concatenated with the encoder
    map of the same resolution (the last stage has no partner).
    """
    h, w, _ = input_size
    n = len(encoder)
    if len(decoder) != n:
        raise ConfigError("decoder must have as many stages as the encoder")
    if not dense:
        raise ConfigError("at least one dense layer is required")
    if h % 2**n or w % 2**n:
        raise ConfigError(f"input {h}x{w} is not divisible by 2**{n}")

    layers = []
    prev = "input"
    for i, c in enumerate(encoder, 1):
        layers.append(LayerSpec(f"enc{i}", "conv", (prev,), c, 3, 2, "relu"))
        prev = f"enc{i}"
    bottleneck = prev
    layers.append(LayerSpec("flatten", "flatten", (bottleneck,)))
    prev = "flatten"
    for i, units in enumerate(dense, 1):
        layers.append(LayerSpec(f"dense{i}", "dense", (prev,), units, activation="relu"))
        prev = f"dense{i}"
    layers.append(LayerSpec("decision", "broadcast", (prev, bottleneck)))
    layers.append(LayerSpec("merge0", "concat", (bottleneck, "decision")))
    prev = "merge0"
    for i, c in enumerate(decoder, 1):
        layers.append(LayerSpec(f"dec{i}", "tconv", (prev,), c, 3, 2, "relu"))
        prev = f"dec{i}"
        if i < n:
            layers.append(LayerSpec(f"merge{i}", "concat", (prev, f"enc{n - i}")))
            prev = f"merge{i}"
    layers.append(LayerSpec("output", "output_conv", (prev,), 1, 1, 1, "sigmoid"))
    config = ModelConfig(tuple(input_size), tuple(layers))
    config.output_shapes()
    return config


def reference_config():
    """The 128x128x3 reference network (214,593 trainable parameters)."""
    return segmentation_config()


def config_from_param_shapes(kinds, weight_shapes):
    """Recover a :func:`segmentation_config` from its trainable tensors.

    ``kinds`` and ``weight_shapes`` list the trainable layers in declaration
    order, as stored in a model file.
    """
    kinds = list(kinds)
    n_enc = kinds.count("conv")
    n_dense = kinds.count("dense")
    expected = ["conv"] * n_enc + ["dense"] * n_dense + ["tconv"] * n_enc + ["output_conv"]
    if kinds != expected or n_enc == 0:
        raise ConfigError(f"layer sequence {kinds} does not match the network family")
    encoder = tuple(s[3] for s in weight_shapes[:n_enc])
    dense = tuple(s[1] for s in weight_shapes[n_enc : n_enc + n_dense])
    decoder = tuple(s[3] for s in weight_shapes[n_enc + n_dense : 2 * n_enc + n_dense])
    flat = weight_shapes[n_enc][0]
    side = round((flat / encoder[-1]) ** 0.5)
    if side * side * encoder[-1] != flat:
        raise ConfigError("cannot infer a square input size from the dense layer")
    size = side * 2**n_enc
    config = segmentation_config((size, size, weight_shapes[0][2]), encoder, dense, decoder)
    stored = [tuple(s) for s in weight_shapes]
    derived = [w for w, _ in config.param_shapes().values()]
    if stored != derived:
        raise ConfigError("stored tensor shapes are inconsistent with the inferred network")
    return config
