"""
Report schemas: cost accounting (profiler) and fidelity metrics (evaluation).

Pydantic models so the CLI can emit them as JSON (`--json`) with the same
fields as the text/CSV renderings.
"""

import math
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, model_validator

# Published reference figures, printed next to computed values.
REFERENCE_PARAMS = 282_883
REFERENCE_GMACS_1900x1060 = 128.78
REFERENCE_GMACS_1280x720 = 78.36
REFERENCE_RUNTIME_S = 0.0277
REFERENCE_FPS = 36.38


class CostRow(BaseModel):
    layer: str
    output_shape: Tuple[int, ...]
    params: int = Field(ge=0)
    macs: int = Field(ge=0)
    applications: int = Field(default=1, ge=1)


class RuntimeStats(BaseModel):
    mean_s: float
    std_s: float
    fps: float
    runs: int
    warmup: int
    height: int
    width: int
    timings_s: List[float]
    machine: Dict[str, str] = Field(default_factory=dict)


class CostReport(BaseModel):
    rows: List[CostRow]
    total_params: int
    total_macs: int
    height: Optional[int] = None
    width: Optional[int] = None
    attention: str = "scram"
    runtime: Optional[RuntimeStats] = None
    notes: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def _totals_match_rows(self) -> "CostReport":
        if self.total_params != sum(r.params for r in self.rows):
            raise ValueError("total_params must equal the sum of row params")
        if self.total_macs != sum(r.macs for r in self.rows):
            raise ValueError("total_macs must equal the sum of row MACs")
        return self

    @property
    def gmacs(self) -> float:
        return self.total_macs / 1e9


class AttentionCostRow(BaseModel):
    module: str
    params: int
    macs: int


class MetricRow(BaseModel):
    scene: str
    mu_psnr: float
    psnr: float
    mu_ssim: float
    ssim: float


METRIC_COLUMNS = ("scene", "mu_psnr", "psnr", "mu_ssim", "ssim")


class MetricReport(BaseModel):
    rows: List[MetricRow]
    skipped: List[str] = Field(default_factory=list)

    @property
    def mean(self) -> MetricRow:
        """Arithmetic mean of every column (an infinite PSNR makes the mean infinite)."""
        n = len(self.rows)
        if n == 0:
            nan = math.nan
            return MetricRow(scene="mean", mu_psnr=nan, psnr=nan, mu_ssim=nan, ssim=nan)
        return MetricRow(
            scene="mean",
            mu_psnr=sum(r.mu_psnr for r in self.rows) / n,
            psnr=sum(r.psnr for r in self.rows) / n,
            mu_ssim=sum(r.mu_ssim for r in self.rows) / n,
            ssim=sum(r.ssim for r in self.rows) / n,
        )


class ProfileDocument(BaseModel):
    """One `--json` document for profile/bench."""

    cost: CostReport
    attention: Optional[List[AttentionCostRow]] = None
