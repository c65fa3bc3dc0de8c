"""File-writing training callbacks: periodic checkpoints and the CSV loss log."""

from pathlib import Path
from typing import List, Sequence
import csv
import io

from apps.adapters.storage import atomic_write_bytes
from apps.adapters.weights.container import save_weights
from apps.core.config import ModelConfig
from apps.core.domain.weights import ModelWeights
from apps.core.observability.logging import get_logger
from apps.core.observability.metrics import checkpoints_written_total
from apps.core.ports.training import EpochEvent, StepEvent, TrainingCallback
from apps.core.services.training import EpochLoss

logger = get_logger(__name__)

LOSS_LOG_HEADER = ("epoch", "lr", "train_loss")


def write_loss_log(path: Path, log: Sequence[EpochLoss]) -> None:
    """CSV `epoch,lr,train_loss`; floats use repr so reruns compare bitwise."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LOSS_LOG_HEADER)
    for row in log:
        writer.writerow((row.epoch, repr(row.lr), repr(row.train_loss)))
    atomic_write_bytes(Path(path), buf.getvalue().encode("utf-8"))


def checkpoint_path(out: Path, epoch: int) -> Path:
    out = Path(out)
    return out.with_name(f"{out.stem}.epoch{epoch:04d}{out.suffix or '.cenh'}")


class CheckpointCallback(TrainingCallback):
    """Writes <out>.epochNNNN.cenh after every `every`-th epoch."""

    def __init__(self, out: Path, every: int):
        self.out = Path(out)
        self.every = every
        self.written: List[Path] = []

    def on_epoch_end(self, event: EpochEvent) -> None:
        if (event.epoch + 1) % self.every:
            return
        path = checkpoint_path(self.out, event.epoch)
        save_weights(event.weights, event.config, path)
        self.written.append(path)
        checkpoints_written_total.inc()
        logger.info("checkpoint_written", epoch=event.epoch, path=str(path))


class LossLogCallback(TrainingCallback):
    """Rewrites the CSV loss log after every epoch so a crash keeps the history."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.rows: List[EpochLoss] = []

    def on_epoch_end(self, event: EpochEvent) -> None:
        self.rows.append(EpochLoss(epoch=event.epoch, lr=event.lr, train_loss=event.train_loss))
        write_loss_log(self.path, self.rows)


class FinalWeightsCallback(TrainingCallback):
    def __init__(self, out: Path):
        self.out = Path(out)

    def on_train_end(self, weights: ModelWeights, config: ModelConfig) -> None:
        save_weights(weights, config, self.out)


class StepLogCallback(TrainingCallback):
    """Logs every optimizer step's loss; the per-epoch CSV only keeps means."""

    def on_step(self, event: StepEvent) -> None:
        logger.info("train_step", epoch=event.epoch, step=event.step, lr=event.lr, loss=event.loss)
