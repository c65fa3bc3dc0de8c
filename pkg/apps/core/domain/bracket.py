"""
Exposure bracket domain model.

Rasters are HWC float32 RGB arrays. LDR frames are normalized to [0, 1];
HDR rasters are linear, non-negative and finite.

Frame order is short → long exposure; the middle frame (index 1) is the
reference the output is aligned to.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from apps.core.errors import BracketError

REFERENCE_INDEX = 1


def ev_to_time(ev: float) -> float:
    """Exposure time relative to the reference: t = 2^EV."""
    return float(2.0 ** ev)


def _check_raster(raster: np.ndarray, what: str) -> None:
    if raster.ndim != 3 or raster.shape[2] != 3:
        raise BracketError(f"{what} must be an (H, W, 3) raster, got shape {raster.shape}")
    if raster.shape[0] < 1 or raster.shape[1] < 1:
        raise BracketError(f"{what} has an empty extent {raster.shape[:2]}")


@dataclass(frozen=True)
class HdrImage:
    """Linear-domain RGB raster (model outputs lie in (0, 1))."""

    pixels: np.ndarray

    def __post_init__(self):
        _check_raster(self.pixels, "HDR image")
        if not np.all(np.isfinite(self.pixels)):
            raise BracketError("HDR image contains non-finite values")
        if np.any(self.pixels < 0):
            raise BracketError("HDR image contains negative values")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class ExposureBracket:
    """Three LDR frames of one scene plus optional supervision targets."""

    ldr: Tuple[np.ndarray, np.ndarray, np.ndarray]
    exposure_times: Tuple[float, float, float]
    gt_hdr: Optional[np.ndarray] = None
    teacher_hdr: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if len(self.ldr) != 3:
            raise BracketError(f"a bracket needs exactly three LDR frames, got {len(self.ldr)}")
        if len(self.exposure_times) != 3:
            raise BracketError(
                f"a bracket needs exactly three exposure times, got {len(self.exposure_times)}"
            )
        for i, frame in enumerate(self.ldr):
            _check_raster(frame, f"LDR frame {i + 1}")
        size = self.ldr[0].shape
        for i, frame in enumerate(self.ldr[1:], start=2):
            if frame.shape != size:
                raise BracketError(
                    f"LDR frame {i} is {frame.shape[1]}x{frame.shape[0]}, "
                    f"frame 1 is {size[1]}x{size[0]}"
                )
        if any(t <= 0 for t in self.exposure_times):
            raise BracketError(f"exposure times must be positive, got {self.exposure_times}")
        t1, t2, t3 = self.exposure_times
        if not t1 < t2 < t3:
            raise BracketError(
                f"exposures must be strictly increasing across frames, got {self.exposure_times}"
            )
        for what, raster in (("ground truth", self.gt_hdr), ("teacher prediction", self.teacher_hdr)):
            if raster is None:
                continue
            _check_raster(raster, what)
            if raster.shape != size:
                raise BracketError(f"{what} shape {raster.shape} does not match LDR frames {size}")

    @classmethod
    def from_evs(
        cls,
        ldr: Sequence[np.ndarray],
        evs: Sequence[float],
        gt_hdr: Optional[np.ndarray] = None,
        teacher_hdr: Optional[np.ndarray] = None,
        name: str = "",
    ) -> "ExposureBracket":
        if len(evs) != 3:
            raise BracketError(f"expected three EV values, got {len(evs)}")
        times = tuple(ev_to_time(ev) for ev in evs)
        return cls(tuple(ldr), times, gt_hdr, teacher_hdr, name)  # type: ignore[arg-type]

    @property
    def height(self) -> int:
        return self.ldr[0].shape[0]

    @property
    def width(self) -> int:
        return self.ldr[0].shape[1]

    @property
    def reference(self) -> np.ndarray:
        return self.ldr[REFERENCE_INDEX]


@dataclass(frozen=True)
class SceneSample:
    """A training/evaluation scene: a bracket with mandatory ground truth."""

    bracket: ExposureBracket
    source: Optional[Path] = None

    def __post_init__(self):
        if self.bracket.gt_hdr is None:
            raise BracketError(f"scene {self.bracket.name!r} has no ground-truth HDR")

    @property
    def name(self) -> str:
        return self.bracket.name

    @property
    def gt(self) -> np.ndarray:
        return self.bracket.gt_hdr  # type: ignore[return-value]

    @property
    def teacher(self) -> Optional[np.ndarray]:
        return self.bracket.teacher_hdr


@dataclass
class PatchSample:
    """Aligned crop of every raster of a scene (LDRs, gt, optional teacher)."""

    ldr: Tuple[np.ndarray, np.ndarray, np.ndarray]
    exposure_times: Tuple[float, float, float]
    gt: np.ndarray
    teacher: Optional[np.ndarray] = None
    scene: str = ""
    origin: Tuple[int, int] = (0, 0)
    transform: Tuple[bool, int] = field(default=(False, 0))

    @property
    def size(self) -> Tuple[int, int]:
        return self.gt.shape[0], self.gt.shape[1]

    def rasters(self) -> Tuple[np.ndarray, ...]:
        base = (*self.ldr, self.gt)
        return base if self.teacher is None else (*base, self.teacher)
