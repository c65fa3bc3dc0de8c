"""
Training: patch extraction, augmentation, distillation loss, LR schedule and
the optimization loop.

Each step:
    batch of patches → assemble inputs → forward (taped) → kd_loss → backward → adam_step

Reproducibility:
    - the patch order of epoch e is a permutation drawn from (seed, e)
    - the augmentation of patch i in epoch e is drawn from (seed, e, i)
  so the batch sequence is independent of how many loader threads build it.

Usage:
    result = train(samples, weights, model_config, train_config, callbacks=[...])
    result.weights, result.loss_log
"""

from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import math
import numpy as np

from apps.core.config import ModelConfig, TrainConfig
from apps.core.domain.bracket import PatchSample, SceneSample
from apps.core.domain.weights import ModelWeights
from apps.core.errors import ConfigError, DatasetError, TrainingDivergedError
from apps.core.kernels import autodiff as ad
from apps.core.kernels.autodiff import Tape, Variable
from apps.core.kernels.optim import AdamState, adam_step
from apps.core.observability.logging import get_logger
from apps.core.observability.metrics import train_loss, train_steps_total
from apps.core.ports.training import (
    Batch,
    BatchSource,
    EpochEvent,
    StepEvent,
    TrainingCallback,
)
from apps.core.services import cenhdr
from apps.core.services.pipeline import gamma_project

logger = get_logger(__name__)


# ─── Patches ────────────────────────────────────────────────────────────────

def patch_origins(size: int, patch_size: int, stride: int) -> List[int]:
    """Stride grid along one axis plus an edge-snapped last window."""
    if size <= patch_size:
        return [0]
    origins = list(range(0, size - patch_size + 1, stride))
    if origins[-1] + patch_size < size:
        origins.append(size - patch_size)
    return origins


def _pad_to(raster: np.ndarray, height: int, width: int) -> np.ndarray:
    pad_h, pad_w = max(0, height - raster.shape[0]), max(0, width - raster.shape[1])
    if not (pad_h or pad_w):
        return raster
    # reflect cannot pad past the raster extent
    mode = "reflect" if pad_h < raster.shape[0] and pad_w < raster.shape[1] else "edge"
    return np.pad(raster, ((0, pad_h), (0, pad_w), (0, 0)), mode=mode)


def extract_patches(sample: SceneSample, patch_size: int = 256, stride: int = 128) -> List[PatchSample]:
    """
    All aligned crops on the stride grid (plus edge-snapped borders), with the
    same window applied to every raster of the scene. An image smaller than a
    patch along an axis is padded up to the patch size on that axis.
    """
    bracket = sample.bracket
    rasters = [*bracket.ldr, sample.gt]
    if sample.teacher is not None:
        rasters.append(sample.teacher)
    height = max(bracket.height, patch_size)
    width = max(bracket.width, patch_size)
    rasters = [_pad_to(r, height, width) for r in rasters]

    patches: List[PatchSample] = []
    for y in patch_origins(height, patch_size, stride):
        for x in patch_origins(width, patch_size, stride):
            crops = [np.ascontiguousarray(r[y:y + patch_size, x:x + patch_size]) for r in rasters]
            patches.append(
                PatchSample(
                    ldr=(crops[0], crops[1], crops[2]),
                    exposure_times=bracket.exposure_times,
                    gt=crops[3],
                    teacher=crops[4] if len(crops) > 4 else None,
                    scene=sample.name,
                    origin=(y, x),
                )
            )
    return patches


def apply_transform(patch: PatchSample, flip: bool, k: int) -> PatchSample:
    """Horizontal flip (optional) followed by k counter-clockwise 90° rotations."""

    def tf(r: np.ndarray) -> np.ndarray:
        if flip:
            r = r[:, ::-1]
        return np.ascontiguousarray(np.rot90(r, k % 4, axes=(0, 1)))

    return PatchSample(
        ldr=(tf(patch.ldr[0]), tf(patch.ldr[1]), tf(patch.ldr[2])),
        exposure_times=patch.exposure_times,
        gt=tf(patch.gt),
        teacher=tf(patch.teacher) if patch.teacher is not None else None,
        scene=patch.scene,
        origin=patch.origin,
        transform=(flip, k % 4),
    )


def augment(patch: PatchSample, rng: np.random.Generator) -> PatchSample:
    """Random horizontal flip (p = 0.5), then a rotation drawn from {0, 90, 180, 270}."""
    flip = bool(rng.random() < 0.5)
    k = int(rng.integers(0, 4))
    return apply_transform(patch, flip, k)


# ─── Loss / schedule ────────────────────────────────────────────────────────

def _as_var(x: Union[np.ndarray, Variable]) -> Variable:
    return x if isinstance(x, Variable) else Variable(np.asarray(x))


def kd_loss(
    pred: Union[np.ndarray, Variable],
    gt: Union[np.ndarray, Variable],
    teacher: Optional[Union[np.ndarray, Variable]],
    alpha: float = 0.2,
    mu: float = 5000.0,
    kd_enabled: bool = True,
) -> Variable:
    """
    alpha·L1(T(pred), T(gt)) + (1 − alpha)·L1(T(pred), T(teacher)), T = mu-law.

    With kd_enabled false the teacher is ignored and the loss is L1(T(pred), T(gt)).

    Raises:
        ConfigError: kd_enabled without a teacher prediction
    """
    t_pred = ad.mu_law(_as_var(pred), mu)
    t_gt = ad.mu_law(_as_var(gt), mu)
    loss_gt = ad.l1_loss(t_pred, t_gt)
    if not kd_enabled:
        return loss_gt
    if teacher is None:
        raise ConfigError("knowledge distillation is enabled but no teacher prediction was given")
    loss_teacher = ad.l1_loss(t_pred, ad.mu_law(_as_var(teacher), mu))
    return ad.weighted_sum([loss_gt, loss_teacher], [alpha, 1.0 - alpha])


def lr_at(epoch: int, config: TrainConfig) -> float:
    """lr0 for the first lr_fixed_epochs epochs, then × lr_decay at every lr_decay_every boundary."""
    if epoch < config.lr_fixed_epochs:
        return config.lr0
    decays = 1 + (epoch - config.lr_fixed_epochs) // config.lr_decay_every
    return config.lr0 * config.lr_decay ** decays


# ─── Batches ────────────────────────────────────────────────────────────────

def patch_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, epoch, index])


def epoch_order(seed: int, epoch: int, count: int, batch_size: int) -> List[List[int]]:
    """Shuffled global patch indices of one epoch, split into batches."""
    order = np.random.default_rng([seed, epoch]).permutation(count)
    return [order[i:i + batch_size].tolist() for i in range(0, count, batch_size)]


def make_batch(
    patches: Sequence[PatchSample],
    indices: Sequence[int],
    epoch: int,
    seed: int,
    augment_patches: bool,
    gamma: float,
) -> Batch:
    inputs: List[List[np.ndarray]] = [[], [], []]
    gts, teachers = [], []
    for index in indices:
        patch = patches[index]
        if augment_patches:
            patch = augment(patch, patch_rng(seed, epoch, index))
        for i, (ldr, t) in enumerate(zip(patch.ldr, patch.exposure_times)):
            stacked = np.concatenate([ldr, gamma_project(ldr, t, gamma)], axis=2)
            inputs[i].append(stacked.transpose(2, 0, 1))
        gts.append(patch.gt.transpose(2, 0, 1))
        if patch.teacher is not None:
            teachers.append(patch.teacher.transpose(2, 0, 1))
    stack = lambda xs: np.ascontiguousarray(np.stack(xs), dtype=np.float32)  # noqa: E731
    return Batch(
        inputs=(stack(inputs[0]), stack(inputs[1]), stack(inputs[2])),
        gt=stack(gts),
        teacher=stack(teachers) if len(teachers) == len(indices) else None,
        indices=tuple(indices),
    )


@dataclass
class SerialBatchSource(BatchSource):
    """Builds batches in-line on the training thread."""

    patches: Sequence[PatchSample]
    seed: int
    augment: bool
    gamma: float

    def iter_epoch(self, epoch: int, batches: Sequence[Sequence[int]]) -> Iterator[Batch]:
        for indices in batches:
            yield make_batch(self.patches, indices, epoch, self.seed, self.augment, self.gamma)


# ─── Loop ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class EpochLoss:
    epoch: int
    lr: float
    train_loss: float


@dataclass
class TrainResult:
    weights: ModelWeights
    loss_log: List[EpochLoss] = field(default_factory=list)
    steps: int = 0


def collect_patches(dataset: Sequence[SceneSample], config: TrainConfig) -> List[PatchSample]:
    patches: List[PatchSample] = []
    for sample in dataset:
        patches.extend(extract_patches(sample, config.patch_size, config.stride))
    return patches


def train_step(
    params: dict,
    state: AdamState,
    batch: Batch,
    model_config: ModelConfig,
    train_config: TrainConfig,
    lr: float,
) -> Tuple[dict, AdamState, float]:
    """One forward/backward/Adam update. Returns new params, new state and the loss.

    A non-finite loss leaves params and state untouched.
    """
    tape = Tape()
    bound = {name: tape.watch(value, name) for name, value in params.items()}
    pred = cenhdr.forward_graph(batch.inputs, bound, model_config)
    loss = kd_loss(
        pred,
        batch.gt,
        batch.teacher,
        alpha=train_config.alpha,
        mu=train_config.mu,
        kd_enabled=train_config.kd_enabled,
    )
    value = float(loss.value)
    if not math.isfinite(value):
        return params, state, value
    grads = ad.backward(tape, loss)
    params, state = adam_step(params, grads, state, lr)
    return params, state, value


def train(
    dataset: Sequence[SceneSample],
    weights: ModelWeights,
    model_config: ModelConfig,
    train_config: TrainConfig,
    callbacks: Sequence[TrainingCallback] = (),
    batch_source_factory: Optional[Callable[[Sequence[PatchSample]], BatchSource]] = None,
) -> TrainResult:
    """
    Raises:
        DatasetError:          empty dataset
        ConfigError:           kd_enabled but a scene has no teacher prediction
        TrainingDivergedError: the loss became non-finite
    """
    if not dataset:
        raise DatasetError("training needs at least one scene")
    if train_config.kd_enabled:
        missing = [s.name for s in dataset if s.teacher is None]
        if missing:
            raise ConfigError(
                "knowledge distillation is enabled but scenes lack teacher predictions: "
                + ", ".join(missing)
            )
    cenhdr.validate_weights(weights, model_config)

    patches = collect_patches(dataset, train_config)
    if batch_source_factory is not None:
        source = batch_source_factory(patches)
    else:
        source = SerialBatchSource(patches, train_config.seed, train_config.augment, model_config.gamma)
    logger.info(
        "training_started",
        scenes=len(dataset),
        patches=len(patches),
        epochs=train_config.epochs,
        kd_enabled=train_config.kd_enabled,
        alpha=train_config.alpha,
        max_steps=train_config.max_steps,
    )

    params = weights.as_dict()
    state = AdamState()
    result = TrainResult(weights=weights)
    step = 0
    for epoch in range(train_config.epochs):
        lr = lr_at(epoch, train_config)
        batches = epoch_order(train_config.seed, epoch, len(patches), train_config.batch_size)
        losses: List[float] = []
        for batch in source.iter_epoch(epoch, batches):
            params, state, value = train_step(params, state, batch, model_config, train_config, lr)
            step += 1
            if not math.isfinite(value):
                raise TrainingDivergedError(epoch, step, value)
            losses.append(value)
            train_steps_total.inc()
            train_loss.set(value)
            for cb in callbacks:
                cb.on_step(StepEvent(epoch=epoch, step=step, lr=lr, loss=value))
            if train_config.max_steps is not None and step >= train_config.max_steps:
                break

        epoch_loss = float(np.mean(losses)) if losses else math.nan
        result.loss_log.append(EpochLoss(epoch=epoch, lr=lr, train_loss=epoch_loss))
        current = ModelWeights(params)
        logger.info("epoch_completed", epoch=epoch, lr=lr, train_loss=epoch_loss, steps=step)
        for cb in callbacks:
            cb.on_epoch_end(
                EpochEvent(epoch=epoch, lr=lr, train_loss=epoch_loss, steps=step,
                           weights=current, config=model_config)
            )
        if train_config.max_steps is not None and step >= train_config.max_steps:
            break

    result.weights = ModelWeights(params)
    result.steps = step
    for cb in callbacks:
        cb.on_train_end(result.weights, model_config)
    logger.info("training_finished", steps=step, epochs=len(result.loss_log))
    return result
