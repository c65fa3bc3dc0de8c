"""
HDR pipeline: LDR rasters in, model tensors, HDR rasters out.

    bracket ─▶ gamma_project ─▶ assemble_inputs (concat, pad to even) ─▶ forward
            ─▶ crop ─▶ HdrImage ─▶ mu_law / tonemap_8bit

Rasters are HWC float arrays; tensors are NCHW. File I/O lives in
apps.adapters.images.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from apps.core.config import ModelConfig
from apps.core.domain.bracket import ExposureBracket, HdrImage
from apps.core.domain.weights import ModelWeights
from apps.core.errors import BracketError
from apps.core.kernels import ops
from apps.core.observability.metrics import stage_timer
from apps.core.services import cenhdr


@dataclass(frozen=True)
class AssembledInputs:
    """Three (1, 6, H', W') tensors plus the bottom/right padding applied."""

    tensors: Tuple[np.ndarray, np.ndarray, np.ndarray]
    height: int
    width: int
    pad_bottom: int
    pad_right: int


def gamma_project(ldr: np.ndarray, exposure_time: float, gamma: float = 2.2) -> np.ndarray:
    """I^gamma / t, elementwise."""
    if exposure_time <= 0:
        raise BracketError(f"exposure time must be positive, got {exposure_time}")
    ldr = np.asarray(ldr)
    dtype = ops.result_dtype(ldr)
    return (np.power(ldr.astype(np.float64), gamma) / exposure_time).astype(dtype)


def pad_to_even(raster: np.ndarray) -> Tuple[np.ndarray, int, int]:
    """Reflection-pad the bottom/right of an HWC raster to even height/width."""
    height, width = raster.shape[:2]
    pad_bottom, pad_right = height % 2, width % 2
    if not (pad_bottom or pad_right):
        return raster, 0, 0
    widths = ((0, pad_bottom), (0, pad_right)) + ((0, 0),) * (raster.ndim - 2)
    # reflect needs at least two samples along an axis
    mode = "reflect" if min(height, width) > 1 else "edge"
    return np.pad(raster, widths, mode=mode), pad_bottom, pad_right


def assemble_inputs(bracket: ExposureBracket, gamma: float = 2.2) -> AssembledInputs:
    """L_i = concat(I_i, gamma_project(I_i, t_i)) for each frame, as (1, 6, H', W')."""
    sizes = {frame.shape for frame in bracket.ldr}
    if len(sizes) != 1:
        raise BracketError(f"bracket frames differ in size: {sorted(sizes)}")
    tensors = []
    pad_bottom = pad_right = 0
    for frame, t in zip(bracket.ldr, bracket.exposure_times):
        frame = np.asarray(frame, dtype=np.float32)
        stacked = np.concatenate([frame, gamma_project(frame, t, gamma)], axis=2)
        stacked, pad_bottom, pad_right = pad_to_even(stacked)
        tensors.append(np.ascontiguousarray(stacked.transpose(2, 0, 1)[None]))
    return AssembledInputs(
        tensors=tuple(tensors),  # type: ignore[arg-type]
        height=bracket.height,
        width=bracket.width,
        pad_bottom=pad_bottom,
        pad_right=pad_right,
    )


def crop(tensor: np.ndarray, assembled: AssembledInputs) -> np.ndarray:
    """Undo the padding recorded by assemble_inputs on an NCHW tensor."""
    return tensor[:, :, : assembled.height, : assembled.width]


def tensor_to_raster(tensor: np.ndarray) -> np.ndarray:
    """(1, C, H, W) → (H, W, C)."""
    return np.ascontiguousarray(tensor[0].transpose(1, 2, 0))


def raster_to_tensor(raster: np.ndarray) -> np.ndarray:
    """(H, W, C) → (1, C, H, W)."""
    return np.ascontiguousarray(np.asarray(raster).transpose(2, 0, 1)[None])


def mu_law(hdr: np.ndarray, mu: float = 5000.0) -> np.ndarray:
    """log(1 + mu·H) / log(1 + mu); rejects negative values."""
    return ops.mu_law(np.asarray(hdr), mu)


def tonemap_8bit(hdr: np.ndarray, mu: float = 5000.0) -> np.ndarray:
    """mu-law tone map then 8-bit quantization round(255·T), round half up."""
    t = mu_law(hdr, mu).astype(np.float64)
    return np.clip(np.floor(255.0 * t + 0.5), 0, 255).astype(np.uint8)


def predict(
    bracket: ExposureBracket,
    weights: ModelWeights,
    config: ModelConfig,
    timings: Optional[Dict[str, float]] = None,
) -> HdrImage:
    """Run the network on one bracket at full resolution; output matches the bracket size."""
    with stage_timer("assemble", timings):
        assembled = assemble_inputs(bracket, config.gamma)
    with stage_timer("forward", timings):
        out = cenhdr.forward(*assembled.tensors, weights, config)
    with stage_timer("crop", timings):
        raster = tensor_to_raster(crop(out, assembled))
    return HdrImage(raster)
