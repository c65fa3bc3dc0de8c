"""
LDR raster I/O: PNG (8/16-bit, via OpenCV) and binary PPM (P6, 8/16-bit).

Rasters are returned as (H, W, 3) float32 RGB in [0, 1]; integer samples are
divided by the format maximum (255, 65535, or the PPM maxval). Greyscale
PNGs are replicated to RGB and alpha is dropped.
"""

from pathlib import Path
import struct

import cv2
import numpy as np

from apps.adapters.storage import atomic_write_bytes
from apps.core.errors import (
    CorruptHeaderError,
    DimensionOverflowError,
    ImageFormatError,
    UnsupportedFormatError,
)
from apps.core.services.pipeline import tonemap_8bit

MAX_DIMENSION = 1 << 16

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
PNG_SUFFIXES = (".png",)
PPM_SUFFIXES = (".ppm", ".pnm")


def read_ldr(path: Path) -> np.ndarray:
    path = Path(path)
    suffix = path.suffix.lower()
    data = path.read_bytes()
    if suffix in PNG_SUFFIXES:
        return _decode_png(data, path)
    if suffix in PPM_SUFFIXES:
        return _decode_ppm(data, path)
    raise UnsupportedFormatError(f"{path}: unsupported LDR format {suffix or '(none)'}")


# ─── PNG ────────────────────────────────────────────────────────────────────

def _decode_png(data: bytes, path: Path) -> np.ndarray:
    if not data.startswith(PNG_SIGNATURE) or len(data) < 24 or data[12:16] != b"IHDR":
        raise CorruptHeaderError(f"{path}: missing PNG signature or IHDR chunk")
    width, height = struct.unpack(">II", data[16:24])
    if width < 1 or height < 1:
        raise CorruptHeaderError(f"{path}: PNG dimensions must be positive, got {width}x{height}")
    if width > MAX_DIMENSION or height > MAX_DIMENSION:
        raise DimensionOverflowError(f"{path}: PNG dimensions {width}x{height} exceed {MAX_DIMENSION}")

    img = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise CorruptHeaderError(f"{path}: PNG could not be decoded")
    if img.ndim == 2:
        img = cv2.cvtColor(img, cv2.COLOR_GRAY2RGB)
    elif img.shape[2] == 4:
        img = cv2.cvtColor(img, cv2.COLOR_BGRA2RGB)
    else:
        img = cv2.cvtColor(img, cv2.COLOR_BGR2RGB)
    return _normalize(img, path)


def _normalize(img: np.ndarray, path: Path) -> np.ndarray:
    if img.dtype == np.uint8:
        return img.astype(np.float32) / np.float32(255.0)
    if img.dtype == np.uint16:
        return img.astype(np.float32) / np.float32(65535.0)
    raise UnsupportedFormatError(f"{path}: unsupported sample type {img.dtype}")


# ─── PPM ────────────────────────────────────────────────────────────────────

def _ppm_tokens(data: bytes, path: Path, count: int) -> tuple[list[bytes], int]:
    """Read `count` whitespace-separated header tokens, skipping # comments."""
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise CorruptHeaderError(f"{path}: PPM header is truncated")
        if data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise CorruptHeaderError(f"{path}: PPM header is truncated")
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, pos + 1


def _decode_ppm(data: bytes, path: Path) -> np.ndarray:
    if not data.startswith(b"P6"):
        raise UnsupportedFormatError(f"{path}: only binary PPM (P6) is supported")
    tokens, pos = _ppm_tokens(data, path, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise CorruptHeaderError(f"{path}: malformed PPM header {b' '.join(tokens)!r}") from exc
    if width < 1 or height < 1:
        raise CorruptHeaderError(f"{path}: PPM dimensions must be positive, got {width}x{height}")
    if width > MAX_DIMENSION or height > MAX_DIMENSION:
        raise DimensionOverflowError(f"{path}: PPM dimensions {width}x{height} exceed {MAX_DIMENSION}")
    if not 0 < maxval <= 65535:
        raise CorruptHeaderError(f"{path}: PPM maxval must be in 1..65535, got {maxval}")

    dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
    count = width * height * 3
    if len(data) - pos < count * dtype.itemsize:
        raise CorruptHeaderError(f"{path}: PPM payload is shorter than {width}x{height}x3 samples")
    samples = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    raster = samples.reshape(height, width, 3).astype(np.float32)
    return raster / np.float32(maxval)


def encode_ppm(raster: np.ndarray, bits: int = 8) -> bytes:
    """Quantize a [0, 1] raster to a binary PPM (big-endian samples for 16-bit)."""
    height, width = raster.shape[:2]
    maxval = 255 if bits == 8 else 65535
    q = np.floor(np.clip(raster, 0.0, 1.0) * maxval + 0.5)
    body = q.astype(np.uint8 if bits == 8 else ">u2").tobytes()
    return f"P6\n{width} {height}\n{maxval}\n".encode("ascii") + body


# ─── Writers ────────────────────────────────────────────────────────────────

def _encode_png(rgb: np.ndarray) -> bytes:
    ok, buf = cv2.imencode(".png", cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
    if not ok:
        raise ImageFormatError("PNG encoding failed")
    return buf.tobytes()


def write_ldr(path: Path, raster: np.ndarray, bits: int = 8) -> None:
    """Quantize a [0, 1] raster to an 8/16-bit PNG or PPM, chosen by suffix."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix in PPM_SUFFIXES:
        atomic_write_bytes(path, encode_ppm(raster, bits))
        return
    if suffix not in PNG_SUFFIXES:
        raise UnsupportedFormatError(f"{path}: unsupported LDR format {suffix or '(none)'}")
    maxval = 255 if bits == 8 else 65535
    q = np.floor(np.clip(raster, 0.0, 1.0) * maxval + 0.5).astype(np.uint8 if bits == 8 else np.uint16)
    atomic_write_bytes(path, _encode_png(q))


def write_tonemapped(path: Path, hdr: np.ndarray, mu: float = 5000.0) -> None:
    """mu-law tone map, 8-bit quantization, PNG."""
    atomic_write_bytes(Path(path), _encode_png(tonemap_8bit(hdr, mu)))
