import struct
import zlib

import numpy as np
import pytest

from emopipe.errors import BadMagic, ChecksumMismatch, TruncatedFile, UnsupportedVersion
from emopipe.nn import CnnModel, MlpModel, load_model, read_model, save_model, write_model


@pytest.fixture(scope="module")
def default_mlp():
    return MlpModel.create(114, seed=11)


def test_default_mlp_roundtrip_bitwise(default_mlp):
    back = load_model(save_model(default_mlp))
    xs = np.random.default_rng(0).random((10, 114))
    for x in xs:
        assert back.forward(x).tobytes() == default_mlp.forward(x).tobytes()
    assert back.class_labels == default_mlp.class_labels
    assert back.dropout_rates == default_mlp.dropout_rates
    assert back.dims == default_mlp.dims


def test_cnn_roundtrip(tmp_path):
    m = CnnModel.create(16, filters=4, seed=2, class_labels=("a", "b", "c"))
    write_model(m, tmp_path / "c.emo")
    back = read_model(tmp_path / "c.emo")
    g = (np.random.default_rng(1).random((3, 16, 16)) > 0.7).astype(np.float32)
    assert back.forward(g).tobytes() == m.forward(g).tobytes()
    assert (back.grid_size, back.dropout_rate, back.class_labels) == (16, 0.25, ["a", "b", "c"])


def test_header_layout():
    m = MlpModel.create(4, (3,), seed=0)
    raw = save_model(m)
    assert raw[:4] == b"EMO1"
    assert struct.unpack("<HB", raw[4:7]) == (1, 0)
    assert raw[7] == 2 and raw[8] == len("happiness") and raw[9:18] == b"happiness"
    # 7-byte header, labels, u16 layer count, 2 x 13-byte layer records, f32 params, crc
    labels = 1 + 1 + 9 + 1 + 7
    assert len(raw) == 7 + labels + 2 + 2 * 13 + 4 * m.n_params() + 4
    assert struct.unpack("<I", raw[-4:])[0] == zlib.crc32(raw[:-4])


def test_bad_magic(default_mlp):
    raw = bytearray(save_model(default_mlp))
    raw[0:4] = b"XXXX"
    with pytest.raises(BadMagic):
        load_model(bytes(raw))


def test_unsupported_version():
    raw = bytearray(save_model(MlpModel.create(4, (3,))))
    raw[4:6] = struct.pack("<H", 9)
    with pytest.raises(UnsupportedVersion):
        load_model(bytes(raw))


def test_truncated_mid_weights(default_mlp):
    raw = save_model(default_mlp)
    with pytest.raises(TruncatedFile):
        load_model(raw[:len(raw) // 2])
    with pytest.raises(TruncatedFile):
        load_model(raw[:10])


def test_checksum_mismatch():
    raw = bytearray(save_model(MlpModel.create(4, (3,), seed=0)))
    raw[-10] ^= 0xFF
    with pytest.raises(ChecksumMismatch):
        load_model(bytes(raw))


def test_save_is_deterministic(default_mlp):
    assert save_model(default_mlp) == save_model(load_model(save_model(default_mlp)))
