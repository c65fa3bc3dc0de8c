"""
Weight container (.cenh)

Layout (little-endian):

    b"CENH"                 magic
    u16                     format version (1)
    u32                     manifest length in bytes
    manifest                UTF-8 JSON {"config": {...}, "tensors": [{"name", "shape", "offset"}, ...]}
    payload                 float32 tensors in manifest order; offsets relative to payload start
    u32                     CRC-32 of every preceding byte

The embedded ModelConfig makes a file self-describing: load_weights checks
every tensor against the shapes that configuration implies.

Usage:
    save_weights(weights, config, Path("model.cenh"))
    weights, config = load_weights(Path("model.cenh"))
"""

from pathlib import Path
from typing import List, Tuple
import json
import struct
import zlib

import numpy as np
from pydantic import ValidationError

from apps.adapters.storage import atomic_write_bytes
from apps.core.config import ModelConfig
from apps.core.domain.weights import ModelWeights
from apps.core.errors import (
    ChecksumError,
    ShapeDisagreementError,
    UnsupportedVersionError,
    WeightFormatError,
)
from apps.core.observability.logging import get_logger
from apps.core.services.cenhdr import expected_shapes

logger = get_logger(__name__)

MAGIC = b"CENH"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sHI")
_CRC = struct.Struct("<I")


def encode_weights(weights: ModelWeights, config: ModelConfig) -> bytes:
    entries: List[dict] = []
    chunks: List[bytes] = []
    offset = 0
    for name in weights.names():
        arr = np.ascontiguousarray(weights[name], dtype="<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunk = arr.tobytes()
        chunks.append(chunk)
        offset += len(chunk)

    manifest = json.dumps(
        {"config": config.model_dump(mode="json"), "tensors": entries},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(manifest)) + manifest + b"".join(chunks)
    return body + _CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def save_weights(weights: ModelWeights, config: ModelConfig, path: Path) -> None:
    payload = encode_weights(weights, config)
    atomic_write_bytes(Path(path), payload)
    logger.info("weights_saved", path=str(path), tensors=len(weights), bytes=len(payload))


def decode_weights(data: bytes, source: str = "<bytes>") -> Tuple[ModelWeights, ModelConfig]:
    """
    Raises:
        ChecksumError:            CRC mismatch, including truncated files
        UnsupportedVersionError:  version other than FORMAT_VERSION
        ShapeDisagreementError:   manifest shapes disagree with the embedded config
        WeightFormatError:        bad magic or unparseable manifest
    """
    if len(data) < _PREFIX.size + _CRC.size:
        raise ChecksumError(f"{source}: file is truncated ({len(data)} bytes)")
    body, trailer = data[:-_CRC.size], data[-_CRC.size:]
    (stored_crc,) = _CRC.unpack(trailer)
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError(f"{source}: CRC-32 mismatch (file corrupt or truncated)")

    magic, version, manifest_len = _PREFIX.unpack_from(body, 0)
    if magic != MAGIC:
        raise WeightFormatError(f"{source}: not a weight container (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{source}: container version {version} is not supported (expected {FORMAT_VERSION})"
        )

    start = _PREFIX.size
    try:
        manifest = json.loads(body[start:start + manifest_len].decode("utf-8"))
        config = ModelConfig(**manifest["config"])
        entries = manifest["tensors"]
    except (ValueError, KeyError, TypeError, ValidationError) as exc:
        raise WeightFormatError(f"{source}: unreadable manifest: {exc}") from exc

    payload = body[start + manifest_len:]
    expected = expected_shapes(config)
    tensors = {}
    for entry in entries:
        name, shape, offset = entry["name"], tuple(entry["shape"]), int(entry["offset"])
        if name not in expected:
            raise ShapeDisagreementError(f"{source}: tensor {name!r} is not part of the configured model")
        if shape != expected[name]:
            raise ShapeDisagreementError(
                f"{source}: manifest shape {shape} for {name!r} disagrees with configured {expected[name]}"
            )
        count = int(np.prod(shape))
        if offset < 0 or offset + 4 * count > len(payload):
            raise WeightFormatError(f"{source}: tensor {name!r} extends past the payload")
        tensors[name] = (
            np.frombuffer(payload, dtype="<f4", count=count, offset=offset).reshape(shape).astype(np.float32)
        )
    missing = sorted(set(expected) - set(tensors))
    if missing:
        raise ShapeDisagreementError(f"{source}: container lacks tensors {', '.join(missing)}")
    return ModelWeights(tensors), config


def load_weights(path: Path) -> Tuple[ModelWeights, ModelConfig]:
    weights, config = decode_weights(Path(path).read_bytes(), str(path))
    logger.info("weights_loaded", path=str(path), tensors=len(weights), attention=config.attention.value)
    return weights, config
