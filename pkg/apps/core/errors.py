"""Exception hierarchy

Every failure raised by the library derives from CenHdrError so the CLI can
map it to exit code 1 with a stage-named message. Usage errors are handled
by argparse and never reach this hierarchy.

    CenHdrError
      ├─ KernelError
      │    └─ DimensionError          (names the offending axis)
      ├─ GradientError
      ├─ ConfigError
      ├─ WeightFormatError
      │    ├─ ChecksumError
      │    ├─ UnsupportedVersionError
      │    └─ ShapeDisagreementError
      ├─ ImageFormatError
      │    ├─ UnsupportedFormatError
      │    ├─ CorruptHeaderError
      │    └─ DimensionOverflowError
      ├─ BracketError
      ├─ DatasetError
      ├─ TrainingDivergedError
      └─ MetricError
"""

from typing import Optional


class CenHdrError(Exception):
    """Base exception for all library errors"""

    error_code: str = "CENHDR_ERROR"

    def __init__(self, message: str, error_code: Optional[str] = None):
        super().__init__(message)
        if error_code is not None:
            self.error_code = error_code


class KernelError(CenHdrError):
    """Raised when a tensor kernel receives inputs it cannot process"""

    error_code = "KERNEL_ERROR"


class DimensionError(KernelError):
    """Raised on a shape mismatch; `axis` names the offending dimension"""

    error_code = "DIMENSION_MISMATCH"

    def __init__(self, message: str, axis: str):
        super().__init__(f"{message} (axis: {axis})")
        self.axis = axis


class GradientError(CenHdrError):
    """Raised when backward or an optimizer step cannot be performed"""

    error_code = "GRADIENT_ERROR"


class ConfigError(CenHdrError):
    """Raised on invalid or unknown configuration values"""

    error_code = "CONFIG_ERROR"


class WeightFormatError(CenHdrError):
    """Base class for weight container errors"""

    error_code = "WEIGHT_FORMAT_ERROR"


class ChecksumError(WeightFormatError):
    error_code = "CHECKSUM_MISMATCH"


class UnsupportedVersionError(WeightFormatError):
    error_code = "UNSUPPORTED_VERSION"


class ShapeDisagreementError(WeightFormatError):
    error_code = "SHAPE_DISAGREEMENT"


class ImageFormatError(CenHdrError):
    """Base class for raster file errors"""

    error_code = "IMAGE_FORMAT_ERROR"


class UnsupportedFormatError(ImageFormatError):
    error_code = "UNSUPPORTED_FORMAT"


class CorruptHeaderError(ImageFormatError):
    error_code = "CORRUPT_HEADER"


class DimensionOverflowError(ImageFormatError):
    error_code = "DIMENSION_OVERFLOW"


class BracketError(CenHdrError):
    """Raised when an exposure bracket violates its invariants"""

    error_code = "INVALID_BRACKET"


class DatasetError(CenHdrError):
    error_code = "DATASET_ERROR"


class TrainingDivergedError(CenHdrError):
    """Raised when the training loss becomes non-finite"""

    error_code = "NON_FINITE_LOSS"

    def __init__(self, epoch: int, step: int, loss: float):
        super().__init__(
            f"non-finite loss {loss!r} at epoch {epoch}, step {step}"
        )
        self.epoch = epoch
        self.step = step
        self.loss = loss


class MetricError(CenHdrError):
    error_code = "METRIC_ERROR"
