"""`eval`: score a scene directory dataset."""

from pathlib import Path
import argparse

from apps.adapters.dataset.scenes import load_dataset
from apps.adapters.storage import atomic_write_bytes
from apps.adapters.weights.container import load_weights
from apps.cli.common import stage
from apps.cli.render import metric_csv, metric_table
from apps.core.config import Settings
from apps.core.services.evaluation import evaluate


def register(sub: argparse._SubParsersAction) -> None:
    parser = sub.add_parser("eval", help="report PSNR, mu-PSNR, SSIM and mu-SSIM over a dataset")
    parser.add_argument("--data", type=Path, required=True, help="dataset root (one directory per scene)")
    parser.add_argument("--weights", type=Path, required=True, help="weight container (.cenh)")
    parser.add_argument("--csv", type=Path, help="also write the report as CSV")
    parser.add_argument("--mu", type=float, default=5000.0, help="mu-law compression (default 5000)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    with stage("read_weights"):
        weights, config = load_weights(args.weights)
    with stage("load_dataset"):
        dataset = load_dataset(args.data)
    with stage("evaluate"):
        report = evaluate(dataset, weights, config, mu=args.mu)
    if args.csv is not None:
        with stage("write_csv"):
            atomic_write_bytes(args.csv, metric_csv(report).encode("utf-8"))
    print(metric_table(report), end="")
    return 0
