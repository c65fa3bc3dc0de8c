"""`bench`: wall-clock runtime of the full inference pipeline."""

from pathlib import Path
import argparse

from apps.adapters.storage import atomic_write_bytes
from apps.adapters.weights.container import load_weights
from apps.cli.common import add_config_flags, even_int, non_negative_int, positive_int, resolve_configs, stage
from apps.cli.render import cost_csv, cost_table
from apps.core.config import Settings
from apps.core.domain.reports import ProfileDocument
from apps.core.observability.logging import get_logger
from apps.core.services.cenhdr import build_model
from apps.core.services.profiler import bench_runtime, count_macs

logger = get_logger(__name__)


def register(sub: argparse._SubParsersAction) -> None:
    parser = sub.add_parser("bench", help="time gamma projection, forward pass and tone mapping")
    parser.add_argument("--height", type=even_int, default=1060)
    parser.add_argument("--width", type=even_int, default=1900)
    parser.add_argument("--runs", type=positive_int, help="timed runs (default from settings)")
    parser.add_argument("--warmup", type=non_negative_int, help="discarded warm-up runs (default from settings)")
    parser.add_argument("--weights", type=Path, help="weight container; random weights when omitted")
    parser.add_argument("--json", action="store_true", help="emit one JSON document instead of a table")
    parser.add_argument("--csv", type=Path, help="also write the cost report as CSV")
    add_config_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    if args.weights is not None:
        with stage("read_weights"):
            weights, model = load_weights(args.weights)
    else:
        model, _ = resolve_configs(settings, args)
        weights = build_model(model, seed=0)
        logger.info("bench_random_weights", attention=model.attention.value)

    runs = args.runs if args.runs is not None else settings.benchmark.runs
    warmup = args.warmup if args.warmup is not None else settings.benchmark.warmup
    with stage("benchmark"):
        stats = bench_runtime(weights, model, args.height, args.width, runs=runs, warmup=warmup)
    report = count_macs(model, args.height, args.width).model_copy(update={"runtime": stats})
    if args.csv is not None:
        with stage("write_csv"):
            atomic_write_bytes(args.csv, cost_csv(report).encode("utf-8"))
    if args.json:
        print(ProfileDocument(cost=report).model_dump_json(indent=2))
    else:
        print(cost_table(report), end="")
    return 0
