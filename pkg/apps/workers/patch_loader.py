"""
Patch Loader: threaded batch preparation

Builds training batches (crop lookup, augmentation, gamma projection,
stacking) on a thread pool while the optimizer step runs on the calling
thread. At most `prefetch` batches are in flight; batches are yielded in
submission order.

Every batch is a pure function of (seed, epoch, patch indices), so the
sequence of batches is identical for any number of workers.

Usage:
    result = train(samples, weights, model_cfg, train_cfg,
                   batch_source_factory=lambda patches: ThreadedBatchSource(patches, 0, True, 2.2, 4))
"""

from collections import deque
from concurrent.futures import Future, ThreadPoolExecutor
from typing import Deque, Iterator, Sequence

from apps.core.domain.bracket import PatchSample
from apps.core.observability.logging import get_logger
from apps.core.ports.training import Batch, BatchSource
from apps.core.services.training import SerialBatchSource, make_batch

logger = get_logger(__name__)


class ThreadedBatchSource(BatchSource):
    def __init__(
        self,
        patches: Sequence[PatchSample],
        seed: int,
        augment: bool,
        gamma: float,
        workers: int,
        prefetch: int | None = None,
    ):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.patches = patches
        self.seed = seed
        self.augment = augment
        self.gamma = gamma
        self.workers = workers
        self.prefetch = prefetch or 2 * workers

    def iter_epoch(self, epoch: int, batches: Sequence[Sequence[int]]) -> Iterator[Batch]:
        pending: Deque[Future] = deque()
        todo = iter(batches)
        with ThreadPoolExecutor(max_workers=self.workers, thread_name_prefix="patch-loader") as pool:

            def submit_next() -> bool:
                indices = next(todo, None)
                if indices is None:
                    return False
                pending.append(
                    pool.submit(make_batch, self.patches, indices, epoch,
                                self.seed, self.augment, self.gamma)
                )
                return True

            while len(pending) < self.prefetch and submit_next():
                pass
            while pending:
                batch = pending.popleft().result()
                submit_next()
                yield batch
        logger.debug("epoch_batches_loaded", epoch=epoch, batches=len(batches), workers=self.workers)


def batch_source_for(
    patches: Sequence[PatchSample], seed: int, augment: bool, gamma: float, workers: int
) -> BatchSource:
    """In-line source for workers == 0, thread pool otherwise."""
    if workers <= 0:
        return SerialBatchSource(patches, seed, augment, gamma)
    return ThreadedBatchSource(patches, seed, augment, gamma, workers)
