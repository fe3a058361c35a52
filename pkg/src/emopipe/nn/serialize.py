"""Portable binary model files.

Layout (all multi-byte values little-endian)::

    "EMO1"  u16 version  u8 kind (0 = MLP, 1 = CNN)
    u8 n_labels, then per label: u8 byte length + UTF-8 bytes
    MLP: u16 n_layers, then per layer: u32 in, u32 out, u8 activation
         (0 relu, 1 softmax), f32 dropout rate after the layer
    CNN: u32 grid, u32 filters, u32 kernel, u32 pool, f32 dropout, u32 dense_in
    parameters as f32, row-major, in model.params() order
    u32 CRC32 of every preceding byte
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..errors import (BadMagic, ChecksumMismatch, ModelFormatError, TruncatedFile,
                      UnsupportedVersion)
from .models import RELU, SOFTMAX, CnnModel, DenseLayer, MlpModel, Model

MAGIC = b"EMO1"
VERSION = 1
KIND_MLP, KIND_CNN = 0, 1
_ACT_TAGS = {RELU: 0, SOFTMAX: 1}
_ACT_NAMES = {v: k for k, v in _ACT_TAGS.items()}


def save_model(model: Model) -> bytes:
    out = bytearray(MAGIC)
    kind = KIND_MLP if isinstance(model, MlpModel) else KIND_CNN
    out += struct.pack("<HB", VERSION, kind)
    out += struct.pack("<B", len(model.class_labels))
    for label in model.class_labels:
        raw = label.encode("utf-8")
        out += struct.pack("<B", len(raw)) + raw
    if kind == KIND_MLP:
        out += struct.pack("<H", len(model.layers))
        rates = model.dropout_rates + [0.0]
        for layer, rate in zip(model.layers, rates):
            out += struct.pack("<IIBf", layer.in_dim, layer.out_dim,
                               _ACT_TAGS[layer.activation], rate)
    else:
        out += struct.pack("<IIIIfI", model.grid_size, model.filters, model.kernel,
                           model.pool, model.dropout_rate, model.shapes.flattened)
    for p in model.params():
        out += np.ascontiguousarray(p, dtype="<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(out))
    return bytes(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(f"file ends at byte {len(self.data)}, needed {self.pos + n}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, shape) -> np.ndarray:
        n = int(np.prod(shape))
        return np.frombuffer(self.take(4 * n), dtype="<f4").astype(np.float32).reshape(shape)


def load_model(data: bytes) -> Model:
    data = bytes(data)
    if data[:4] != MAGIC:
        raise BadMagic(f"not a model file (magic {data[:4]!r})")
    r = _Reader(data)
    r.take(4)
    version, kind = r.unpack("<HB")
    if version != VERSION:
        raise UnsupportedVersion(f"model file version {version}, supported {VERSION}")
    (n_labels,) = r.unpack("<B")
    labels = []
    for _ in range(n_labels):
        (n,) = r.unpack("<B")
        labels.append(r.take(n).decode("utf-8"))

    if kind == KIND_MLP:
        (n_layers,) = r.unpack("<H")
        table = [r.unpack("<IIBf") for _ in range(n_layers)]
        layers, rates = [], []
        for n_in, n_out, act, rate in table:
            if act not in _ACT_NAMES:
                raise ModelFormatError(f"unknown activation tag {act}")
            w = r.array((n_out, n_in))
            b = r.array((n_out,))
            layers.append(DenseLayer(w, b, _ACT_NAMES[act]))
            rates.append(rate)
        _check_tail(r)
        return MlpModel(layers, rates[:-1], labels)
    if kind == KIND_CNN:
        grid, filters, kernel, pool, rate, dense_in = r.unpack("<IIIIfI")
        conv_w = r.array((filters, kernel, kernel))
        conv_b = r.array((filters,))
        dense_w = r.array((n_labels, dense_in))
        dense_b = r.array((n_labels,))
        _check_tail(r)
        return CnnModel(conv_w, conv_b, dense_w, dense_b, grid, rate, pool, labels)
    raise ModelFormatError(f"unknown model kind {kind}")


def _check_tail(r: _Reader) -> None:
    body_end = r.pos
    (crc,) = r.unpack("<I")
    if r.pos != len(r.data):
        raise ModelFormatError(f"{len(r.data) - r.pos} unexpected trailing bytes")
    if zlib.crc32(r.data[:body_end]) != crc:
        raise ChecksumMismatch("CRC32 does not match file contents")


def write_model(model: Model, path) -> None:
    Path(path).write_bytes(save_model(model))


def read_model(path) -> Model:
    return load_model(Path(path).read_bytes())
