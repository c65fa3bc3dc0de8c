"""
Weight container: save/load, corruption detection, config-driven shape checks.
"""

import json
import struct
import zlib

import numpy as np
import pytest

from apps.adapters.weights.container import (
    FORMAT_VERSION,
    MAGIC,
    decode_weights,
    encode_weights,
    load_weights,
    save_weights,
)
from apps.core.config import AttentionVariant
from apps.core.errors import ChecksumError, ShapeDisagreementError, UnsupportedVersionError, WeightFormatError
from apps.core.services import cenhdr

PREFIX = struct.Struct("<4sHI")


def with_crc(body: bytes) -> bytes:
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def split(data: bytes):
    body = data[:-4]
    _, _, manifest_len = PREFIX.unpack_from(body, 0)
    manifest = json.loads(body[PREFIX.size:PREFIX.size + manifest_len])
    payload = body[PREFIX.size + manifest_len:]
    return manifest, payload


def rebuild(manifest: dict, payload: bytes, version: int = FORMAT_VERSION, magic: bytes = MAGIC) -> bytes:
    raw = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    return with_crc(PREFIX.pack(magic, version, len(raw)) + raw + payload)


def test_save_load_preserves_tensors_and_config(tmp_path, tiny_config):
    config = tiny_config.model_copy(update={"attention": AttentionVariant.SCRAM_SPATIAL_ONLY})
    weights = cenhdr.build_model(config, seed=5)
    path = tmp_path / "model.cenh"
    save_weights(weights, config, path)
    loaded, loaded_config = load_weights(path)
    assert loaded.equals(weights)
    assert loaded_config == config


def test_encoding_is_deterministic(tiny_config):
    weights = cenhdr.build_model(tiny_config, seed=1)
    assert encode_weights(weights, tiny_config) == encode_weights(weights, tiny_config)


def test_single_flipped_byte_fails_checksum(tiny_config):
    data = bytearray(encode_weights(cenhdr.build_model(tiny_config, seed=0), tiny_config))
    data[len(data) // 2] ^= 0x01
    with pytest.raises(ChecksumError):
        decode_weights(bytes(data))


def test_truncated_file_fails_checksum(tiny_config):
    data = encode_weights(cenhdr.build_model(tiny_config, seed=0), tiny_config)
    with pytest.raises(ChecksumError):
        decode_weights(data[:-10])
    with pytest.raises(ChecksumError):
        decode_weights(data[:5])


def test_bad_magic_and_unknown_version(tiny_config):
    manifest, payload = split(encode_weights(cenhdr.build_model(tiny_config, seed=0), tiny_config))
    with pytest.raises(WeightFormatError):
        decode_weights(rebuild(manifest, payload, magic=b"NOPE"))
    with pytest.raises(UnsupportedVersionError):
        decode_weights(rebuild(manifest, payload, version=FORMAT_VERSION + 1))


def test_manifest_shape_disagreeing_with_config(tiny_config):
    manifest, payload = split(encode_weights(cenhdr.build_model(tiny_config, seed=0), tiny_config))
    entry = next(e for e in manifest["tensors"] if e["name"] == "conv_E1.weight")
    entry["shape"] = [entry["shape"][0], 5, 3, 3]
    # valid CRC, so the shape check is what fails
    with pytest.raises(ShapeDisagreementError):
        decode_weights(rebuild(manifest, payload))


def test_missing_tensor_is_rejected(tiny_config):
    manifest, payload = split(encode_weights(cenhdr.build_model(tiny_config, seed=0), tiny_config))
    manifest["tensors"] = [e for e in manifest["tensors"] if e["name"] != "conv_D.bias"]
    with pytest.raises(ShapeDisagreementError):
        decode_weights(rebuild(manifest, payload))


def test_config_change_invalidates_container(tiny_config):
    manifest, payload = split(encode_weights(cenhdr.build_model(tiny_config, seed=0), tiny_config))
    manifest["config"]["attention"] = "ahdrnet_like"
    with pytest.raises(ShapeDisagreementError):
        decode_weights(rebuild(manifest, payload))


def test_float64_weights_are_stored_as_float32(tmp_path, tiny_config):
    weights = cenhdr.build_model(tiny_config, seed=0)
    doubled = type(weights)({k: v.astype(np.float64) for k, v in weights.as_dict().items()})
    save_weights(doubled, tiny_config, tmp_path / "w.cenh")
    loaded, _ = load_weights(tmp_path / "w.cenh")
    assert loaded.equals(weights)
