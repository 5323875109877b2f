"""Binary model files.

Layout (little-endian, no padding)::

    b"IDSG"  u16 version  u32 layer_count
    per trainable layer:
        u8 kind  u16 rank  u32 dims[rank]  f32 weights[prod(dims)]  f32 bias[dims[-1]]
    u32 crc32 of every preceding byte
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .config import ConfigError, config_from_param_shapes
from .model import Model

MAGIC = b"IDSG"
VERSION = 1
KIND_TAGS = {"conv": 1, "tconv": 2, "dense": 3, "output_conv": 4}
TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}


class ModelFormatError(ValueError):
    pass


class BadMagicError(ModelFormatError):
    pass


class VersionError(ModelFormatError):
    pass


class ChecksumError(ModelFormatError):
    pass


class TruncatedFileError(ModelFormatError):
    pass


def dumps(model):
    kinds = {s.name: s.kind for s in model.config.layers}
    parts = [MAGIC, struct.pack("<HI", VERSION, len(model.params))]
    for name, (w, b) in model.params.items():
        parts.append(struct.pack("<BH", KIND_TAGS[kinds[name]], w.ndim))
        parts.append(struct.pack(f"<{w.ndim}I", *w.shape))
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(
                f"model file truncated at byte {self.pos} (needed {n} more bytes)"
            )
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def loads(buf):
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise BadMagicError("not a model file (bad magic bytes)")
    version, count = r.unpack("<HI")
    if version != VERSION:
        raise VersionError(f"unsupported model format version {version}")
    kinds, tensors = [], []
    for _ in range(count):
        tag, rank = r.unpack("<BH")
        if tag not in TAG_KINDS:
            raise ModelFormatError(f"unknown layer kind tag {tag}")
        dims = r.unpack(f"<{rank}I")
        size = int(np.prod(dims))
        w = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(dims)
        b = np.frombuffer(r.take(4 * dims[-1]), dtype="<f4")
        kinds.append(TAG_KINDS[tag])
        tensors.append((w.astype(np.float32), b.astype(np.float32)))
    body_end = r.pos
    (crc,) = r.unpack("<I")
    if r.pos != len(buf):
        raise ModelFormatError(f"{len(buf) - r.pos} unexpected trailing bytes")
    if zlib.crc32(buf[:body_end]) != crc:
        raise ChecksumError("model file checksum mismatch")
    try:
        config = config_from_param_shapes(kinds, [w.shape for w, _ in tensors])
    except ConfigError as exc:
        raise ModelFormatError(str(exc)) from exc
    names = list(config.param_shapes())
    return Model(config, {name: [w, b] for name, (w, b) in zip(names, tensors)})


def save_model(model, path):
    data = dumps(model)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
