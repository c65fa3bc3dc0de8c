"""
Portable float map (PFM) reader/writer.

    PF | Pf            colour (3 channels) | greyscale
    <width> <height>
    <scale>            negative → little-endian, positive → big-endian
    <float32 samples>  rows bottom-to-top

Writes are always "PF", scale -1.0. "Pf" files are read and replicated to
RGB.
"""

from pathlib import Path
import re

import numpy as np

from apps.adapters.storage import atomic_write_bytes
from apps.core.errors import CorruptHeaderError, DimensionOverflowError, UnsupportedFormatError

MAX_DIMENSION = 1 << 16

_DIMS = re.compile(rb"^\s*(\d+)\s+(\d+)\s*$")


def _read_line(data: bytes, pos: int) -> tuple[bytes, int]:
    end = data.find(b"\n", pos)
    if end < 0:
        raise CorruptHeaderError("PFM header is truncated")
    return data[pos:end].rstrip(b"\r"), end + 1


def read_pfm(path: Path) -> np.ndarray:
    """Return an (H, W, 3) float32 raster, top row first."""
    data = Path(path).read_bytes()

    magic, pos = _read_line(data, 0)
    magic = magic.strip()
    if magic == b"PF":
        channels = 3
    elif magic == b"Pf":
        channels = 1
    else:
        raise UnsupportedFormatError(f"{path}: not a PFM file (magic {magic[:8]!r})")

    dims, pos = _read_line(data, pos)
    match = _DIMS.match(dims)
    if not match:
        raise CorruptHeaderError(f"{path}: malformed PFM dimensions line {dims[:32]!r}")
    width, height = int(match.group(1)), int(match.group(2))
    if width < 1 or height < 1:
        raise CorruptHeaderError(f"{path}: PFM dimensions must be positive, got {width}x{height}")
    if width > MAX_DIMENSION or height > MAX_DIMENSION:
        raise DimensionOverflowError(
            f"{path}: PFM dimensions {width}x{height} exceed {MAX_DIMENSION}"
        )

    scale_line, pos = _read_line(data, pos)
    try:
        scale = float(scale_line.strip())
    except ValueError as exc:
        raise CorruptHeaderError(f"{path}: malformed PFM scale {scale_line[:32]!r}") from exc
    if scale == 0.0:
        raise CorruptHeaderError(f"{path}: PFM scale must be non-zero")
    endian = "<" if scale < 0 else ">"

    count = width * height * channels
    payload = data[pos:]
    if len(payload) < count * 4:
        raise CorruptHeaderError(
            f"{path}: PFM payload has {len(payload)} bytes, header implies {count * 4}"
        )
    samples = np.frombuffer(payload, dtype=f"{endian}f4", count=count)
    raster = samples.reshape(height, width, channels)[::-1].astype(np.float32)
    if channels == 1:
        raster = np.repeat(raster, 3, axis=2)
    return np.ascontiguousarray(raster)


def encode_pfm(raster: np.ndarray) -> bytes:
    raster = np.asarray(raster)
    if raster.ndim != 3 or raster.shape[2] != 3:
        raise UnsupportedFormatError(f"PFM output needs an (H, W, 3) raster, got {raster.shape}")
    height, width = raster.shape[:2]
    header = f"PF\n{width} {height}\n-1.0\n".encode("ascii")
    return header + np.ascontiguousarray(raster[::-1], dtype="<f4").tobytes()


def write_pfm(path: Path, raster: np.ndarray) -> None:
    atomic_write_bytes(Path(path), encode_pfm(raster))


# HDR interchange format
write_hdr = write_pfm
