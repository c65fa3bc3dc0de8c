"""
Inference cost accounting and runtime benchmark.

Counting rules:
    conv params  = (c_in·k² + 1)·c_out
    conv MACs    = c_in·k²·c_out·h_out·w_out per application
    linear       = (c_in + 1)·c_out params, c_in·c_out MACs per application
    biases, activations, pooling, pixel shuffle and elementwise ops: 0 MACs

Per-frame layers are applied three times (encoder, conv_M1), attention once
per non-reference frame. Shared weights are counted once as parameters but
every application is counted as MACs.

This module derives its layer table from ModelConfig directly; it does not
consult the model constructor, so the two can be checked against each other.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple
import platform
import time

import cv2
import numpy as np

from apps.core.config import AttentionVariant, ModelConfig
from apps.core.domain.bracket import ExposureBracket
from apps.core.domain.reports import (
    REFERENCE_GMACS_1280x720,
    REFERENCE_GMACS_1900x1060,
    REFERENCE_PARAMS,
    AttentionCostRow,
    CostReport,
    CostRow,
    RuntimeStats,
)
from apps.core.domain.weights import ModelWeights
from apps.core.errors import DimensionError, KernelError
from apps.core.kernels.parallel import thread_limit
from apps.core.observability.logging import get_logger
from apps.core.services import cenhdr
from apps.core.services.pipeline import assemble_inputs, crop, mu_law

logger = get_logger(__name__)

FULL, HALF, VECTOR = "full", "half", "vector"


@dataclass(frozen=True)
class LayerCost:
    name: str
    c_in: int
    c_out: int
    k: int              # 0 for linear layers
    resolution: str     # full | half | vector
    applications: int = 1

    @property
    def params(self) -> int:
        if self.k == 0:
            return (self.c_in + 1) * self.c_out
        return (self.c_in * self.k * self.k + 1) * self.c_out

    def output_shape(self, height: Optional[int], width: Optional[int]) -> Tuple[int, ...]:
        if self.resolution == VECTOR:
            return (self.c_out, 1, 1)
        if height is None or width is None:
            return (self.c_out,)
        if self.resolution == HALF:
            return (self.c_out, height // 2, width // 2)
        return (self.c_out, height, width)

    def macs(self, height: int, width: int) -> int:
        if self.resolution == VECTOR:
            return self.c_in * self.c_out * self.applications
        _, h, w = self.output_shape(height, width)
        return self.c_in * self.k * self.k * self.c_out * h * w * self.applications


def _scram_layers(prefix: str, config: ModelConfig, applications: int) -> List[LayerCost]:
    a = 2 * config.encoder_widths[1]
    cs = config.scram_spatial_channels
    h1, h2, h3 = config.scram_hidden
    layers: List[LayerCost] = []
    if config.attention in (AttentionVariant.SCRAM, AttentionVariant.SCRAM_SPATIAL_ONLY):
        layers += [
            LayerCost(f"{prefix}.spatial.reduce", a, cs, 1, HALF, applications),
            LayerCost(f"{prefix}.spatial.dil1", cs, cs, 3, HALF, applications),
            LayerCost(f"{prefix}.spatial.dil2", cs, cs, 3, HALF, applications),
            LayerCost(f"{prefix}.spatial.dil3", cs, cs, 3, HALF, applications),
            LayerCost(f"{prefix}.spatial.project", cs, 1, 1, HALF, applications),
        ]
    if config.attention in (AttentionVariant.SCRAM, AttentionVariant.SCRAM_CHANNEL_ONLY):
        layers += [
            LayerCost(f"{prefix}.channel.fc1", a, h1, 0, VECTOR, applications),
            LayerCost(f"{prefix}.channel.fc2", h1, h2, 0, VECTOR, applications),
            LayerCost(f"{prefix}.channel.fc3", h2, h3, 0, VECTOR, applications),
            LayerCost(f"{prefix}.channel.fc4", h3, config.encoder_widths[1], 0, VECTOR, applications),
        ]
    return layers


def _ahdrnet_layers(prefix: str, config: ModelConfig, applications: int) -> List[LayerCost]:
    a = 2 * config.encoder_widths[1]
    return [
        LayerCost(f"{prefix}.conv1", a, a, 3, HALF, applications),
        LayerCost(f"{prefix}.conv2", a, config.encoder_widths[1], 3, HALF, applications),
    ]


def layer_table(config: ModelConfig) -> List[LayerCost]:
    e1, e2 = config.encoder_widths
    m = config.merge_width
    layers = [
        LayerCost("conv_E1", 6, e1, 3, FULL, 3),
        LayerCost("conv_E2", e1, e2, 3, HALF, 3),
    ]
    frames = [("shared", 2)] if config.scram_shared_across_frames else [("1", 1), ("3", 1)]
    for key, apps in frames:
        if config.attention in cenhdr.SCRAM_VARIANTS:
            layers += _scram_layers(f"scram.{key}", config, apps)
        elif config.attention == AttentionVariant.AHDRNET_LIKE:
            layers += _ahdrnet_layers(f"attention.{key}", config, apps)
    if config.conv_m1_shared:
        layers.append(LayerCost("conv_M1", e2, m, 3, HALF, 3))
    else:
        layers += [LayerCost(f"conv_M1.{i}", e2, m, 3, HALF, 1) for i in (1, 2, 3)]
    layers += [
        LayerCost("conv_M2", 2 * m, m, 3, HALF),
        LayerCost("conv_M3", m, m, 3, HALF),
        LayerCost("conv_M4", m, m, 3, HALF),
        LayerCost("conv_D", m // (config.upscale ** 2), 3, 3, FULL),
    ]
    return layers


def _check_dims(height: int, width: int) -> None:
    if height < 2 or height % 2:
        raise DimensionError(f"height must be even and >= 2, got {height}", axis="height")
    if width < 2 or width % 2:
        raise DimensionError(f"width must be even and >= 2, got {width}", axis="width")


def _deviation(value: float, reference: float) -> float:
    return (value - reference) / reference * 100.0


def count_params(config: ModelConfig) -> CostReport:
    rows = [
        CostRow(layer=layer.name, output_shape=layer.output_shape(None, None), params=layer.params, macs=0,
                applications=layer.applications)
        for layer in layer_table(config)
    ]
    total = sum(r.params for r in rows)
    return CostReport(
        rows=rows,
        total_params=total,
        total_macs=0,
        attention=config.attention.value,
        notes=[
            f"reference params {REFERENCE_PARAMS}; computed {total} "
            f"({_deviation(total, REFERENCE_PARAMS):+.2f}%)"
        ],
    )


def count_macs(config: ModelConfig, height: int, width: int) -> CostReport:
    _check_dims(height, width)
    rows = [
        CostRow(
            layer=layer.name,
            output_shape=layer.output_shape(height, width),
            params=layer.params,
            macs=layer.macs(height, width),
            applications=layer.applications,
        )
        for layer in layer_table(config)
    ]
    total_params = sum(r.params for r in rows)
    total_macs = sum(r.macs for r in rows)
    gmacs = total_macs / 1e9
    notes = [
        "MACs are multiply-accumulates (FLOPs = 2 x MACs); biases, activations, pooling, "
        "pixel shuffle and elementwise ops count as 0",
        f"reference params {REFERENCE_PARAMS}; computed {total_params} "
        f"({_deviation(total_params, REFERENCE_PARAMS):+.2f}%)",
    ]
    if (height, width) == (1060, 1900):
        notes.append(
            f"reference GMACs at 1900x1060 {REFERENCE_GMACS_1900x1060:.2f}; computed {gmacs:.2f} "
            f"({_deviation(gmacs, REFERENCE_GMACS_1900x1060):+.2f}%)"
        )
    elif (height, width) == (720, 1280):
        notes.append(
            f"reference GMACs at 1280x720 {REFERENCE_GMACS_1280x720:.2f}; computed {gmacs:.2f} "
            f"({_deviation(gmacs, REFERENCE_GMACS_1280x720):+.2f}%); the published 1280x720 and "
            "1900x1060 figures do not scale with pixel count, the 1900x1060 figure is the one reproduced"
        )
    return CostReport(
        rows=rows,
        total_params=total_params,
        total_macs=total_macs,
        height=height,
        width=width,
        attention=config.attention.value,
        notes=notes,
    )


def count_attention(config: ModelConfig, height: int, width: int) -> List[AttentionCostRow]:
    """Cost of one non-reference attention module at the feature resolution (H/2, W/2)."""
    _check_dims(height, width)
    scram_cfg = config.model_copy(update={"attention": AttentionVariant.SCRAM})
    scram_layers = _scram_layers("scram", scram_cfg, 1)
    spatial = [layer for layer in scram_layers if ".spatial." in layer.name]
    channel = [layer for layer in scram_layers if ".channel." in layer.name]
    ahdrnet = _ahdrnet_layers("attention", config, 1)

    def row(module: str, layers: List[LayerCost]) -> AttentionCostRow:
        return AttentionCostRow(
            module=module,
            params=sum(layer.params for layer in layers),
            macs=sum(layer.macs(height, width) for layer in layers),
        )

    return [
        row("scram_spatial", spatial),
        row("scram_channel", channel),
        row("scram", scram_layers),
        row("ahdrnet_attention", ahdrnet),
    ]


# ─── Runtime ────────────────────────────────────────────────────────────────

def machine_descriptors() -> dict:
    return {
        "os": f"{platform.system()} {platform.release()}".strip(),
        "machine": platform.machine() or "unknown",
        "cpu": platform.processor() or "unknown",
        "python": platform.python_version(),
        "numpy": np.__version__,
        "opencv": cv2.__version__,
        "threads": str(thread_limit()),
    }


def synthetic_bracket(height: int, width: int, seed: int = 0) -> ExposureBracket:
    rng = np.random.default_rng(seed)
    frames = tuple(rng.random((height, width, 3), dtype=np.float32) for _ in range(3))
    return ExposureBracket.from_evs(frames, (-2.0, 0.0, 2.0), name="synthetic")


def bench_runtime(
    weights: ModelWeights,
    config: ModelConfig,
    height: int,
    width: int,
    runs: int = 500,
    warmup: int = 50,
    mu: float = 5000.0,
    seed: int = 0,
) -> RuntimeStats:
    """Time gamma projection → forward → tone map on a random bracket; warm-up runs are discarded."""
    _check_dims(height, width)
    if runs < 1 or warmup < 0:
        raise KernelError(f"benchmark needs runs >= 1 and warmup >= 0, got {runs}/{warmup}")
    bracket = synthetic_bracket(height, width, seed)

    def run_once() -> float:
        start = time.perf_counter()
        assembled = assemble_inputs(bracket, config.gamma)
        out = cenhdr.forward(*assembled.tensors, weights, config)
        mu_law(crop(out, assembled), mu)
        return time.perf_counter() - start

    for _ in range(warmup):
        run_once()
    timings = [run_once() for _ in range(runs)]
    mean = float(np.mean(timings))
    stats = RuntimeStats(
        mean_s=mean,
        std_s=float(np.std(timings)),
        fps=1.0 / mean if mean > 0 else float("inf"),
        runs=runs,
        warmup=warmup,
        height=height,
        width=width,
        timings_s=timings,
        machine=machine_descriptors(),
    )
    logger.info("benchmark_completed", height=height, width=width, runs=runs,
                warmup=warmup, mean_s=stats.mean_s, fps=stats.fps)
    return stats
