"""`train`: fit the network on a scene directory dataset, optionally distilling from a teacher."""

from pathlib import Path
import argparse

from apps.adapters.dataset.scenes import load_dataset
from apps.adapters.weights.callbacks import (
    CheckpointCallback,
    FinalWeightsCallback,
    LossLogCallback,
    StepLogCallback,
)
from apps.adapters.weights.container import load_weights
from apps.cli.common import add_config_flags, even_int, non_negative_int, positive_int, resolve_configs, stage, unit_float
from apps.core.config import Settings
from apps.core.observability.logging import get_logger
from apps.core.observability.metrics import start_exporter
from apps.core.services.cenhdr import build_model
from apps.core.services.training import train
from apps.workers.patch_loader import batch_source_for

logger = get_logger(__name__)


def register(sub: argparse._SubParsersAction) -> None:
    parser = sub.add_parser("train", help="train with or without knowledge distillation")
    parser.add_argument("--data", type=Path, required=True, help="dataset root (one directory per scene)")
    parser.add_argument("--out", type=Path, required=True, help="final weight container (.cenh)")
    parser.add_argument("--epochs", type=positive_int)
    parser.add_argument("--alpha", type=unit_float, help="distillation trade-off (default 0.2)")
    parser.add_argument("--teacher-dir", type=Path, help="directory holding teacher predictions")
    parser.add_argument("--no-kd", action="store_true", help="train on ground truth only")
    parser.add_argument("--seed", type=non_negative_int)
    parser.add_argument("--batch-size", type=positive_int)
    parser.add_argument("--patch-size", type=even_int)
    parser.add_argument("--stride", type=positive_int)
    parser.add_argument("--lr", type=float, help="initial learning rate")
    parser.add_argument("--max-steps", type=positive_int, help="stop after this many optimizer steps")
    parser.add_argument("--workers", type=non_negative_int, help="patch loading threads (0 = in-line)")
    parser.add_argument("--checkpoint-every", type=positive_int)
    parser.add_argument("--loss-log", type=Path, help="CSV loss log (default <out stem>.loss.csv)")
    parser.add_argument("--init", type=Path, help="start from these weights instead of a fresh init")
    parser.add_argument("--no-augment", action="store_true", help="disable flip/rotation augmentation")
    parser.add_argument("--metrics-port", type=positive_int, help="expose prometheus metrics on this port")
    add_config_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    model, config = resolve_configs(
        settings,
        args,
        epochs=args.epochs,
        alpha=args.alpha,
        seed=args.seed,
        batch_size=args.batch_size,
        patch_size=args.patch_size,
        stride=args.stride,
        lr0=args.lr,
        max_steps=args.max_steps,
        workers=args.workers,
        checkpoint_every=args.checkpoint_every,
        kd_enabled=False if args.no_kd else None,
        augment=False if args.no_augment else None,
    )

    port = args.metrics_port or settings.observability.metrics_port
    if port:
        start_exporter(port)
        logger.info("metrics_exporter_started", port=port)

    if args.init is not None:
        with stage("read_weights"):
            weights, model = load_weights(args.init)
    else:
        weights = build_model(model, seed=config.seed)

    with stage("load_dataset"):
        dataset = load_dataset(args.data, with_teacher=config.kd_enabled, teacher_dir=args.teacher_dir)

    loss_log = args.loss_log or args.out.with_name(f"{args.out.stem}.loss.csv")
    callbacks = [
        StepLogCallback(),
        LossLogCallback(loss_log),
        CheckpointCallback(args.out, config.checkpoint_every),
        FinalWeightsCallback(args.out),
    ]
    with stage("train"):
        result = train(
            dataset,
            weights,
            model,
            config,
            callbacks=callbacks,
            batch_source_factory=lambda patches: batch_source_for(
                patches, config.seed, config.augment, model.gamma, config.workers
            ),
        )

    print(f"weights: {args.out}")
    print(f"loss log: {loss_log}")
    print(f"steps: {result.steps}  epochs: {len(result.loss_log)}")
    if result.loss_log:
        print(f"final train loss: {result.loss_log[-1].train_loss!r}")
    return 0
