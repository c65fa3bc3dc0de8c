"""Training Port Interface

Defines the contract between the training loop and everything outside the
core that reacts to progress: checkpoint writers, loss logs, progress bars.
The loop never touches the filesystem itself.

Implementations:
    - CheckpointCallback (apps.adapters.weights.callbacks) - periodic weight containers
    - LossLogCallback (apps.adapters.weights.callbacks) - CSV loss log
    - RecordingCallback (tests) - in-memory capture

Batches reach the loop through a BatchSource: in-line (SerialBatchSource in
apps.core.services.training) or a thread pool (apps.workers.patch_loader).

Design Pattern: Hexagonal Architecture (Ports & Adapters)
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence, Tuple

import numpy as np

from apps.core.config import ModelConfig
from apps.core.domain.weights import ModelWeights


@dataclass(frozen=True)
class StepEvent:
    epoch: int
    step: int
    lr: float
    loss: float


@dataclass(frozen=True)
class EpochEvent:
    epoch: int
    lr: float
    train_loss: float
    steps: int
    weights: ModelWeights
    config: ModelConfig


class TrainingCallback(ABC):
    """Receives progress notifications from the training loop. All hooks optional."""

    def on_step(self, event: StepEvent) -> None:
        """Called after every optimizer step."""

    def on_epoch_end(self, event: EpochEvent) -> None:
        """Called once per epoch with the mean training loss and current weights."""

    def on_train_end(self, weights: ModelWeights, config: ModelConfig) -> None:
        """Called once with the final weights."""


@dataclass(frozen=True)
class Batch:
    """Stacked network inputs and targets for one optimizer step."""

    inputs: Tuple[np.ndarray, np.ndarray, np.ndarray]   # (B, 6, P, P) each
    gt: np.ndarray                                      # (B, 3, P, P)
    teacher: Optional[np.ndarray]                       # (B, 3, P, P) or None
    indices: Tuple[int, ...]


class BatchSource(ABC):
    """Turns the patch order of one epoch into ready-to-use batches, in order."""

    @abstractmethod
    def iter_epoch(self, epoch: int, batches: Sequence[Sequence[int]]) -> Iterator[Batch]:
        """Yield one Batch per entry of `batches` (lists of global patch indices)."""
