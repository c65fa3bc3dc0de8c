"""`profile`: closed-form parameter and MAC accounting."""

from pathlib import Path
import argparse

from apps.adapters.storage import atomic_write_bytes
from apps.cli.common import add_config_flags, even_int, resolve_configs, stage
from apps.cli.render import cost_csv, cost_table
from apps.core.config import Settings
from apps.core.domain.reports import ProfileDocument
from apps.core.services.profiler import count_attention, count_macs


def register(sub: argparse._SubParsersAction) -> None:
    parser = sub.add_parser("profile", help="count parameters and MACs at a given resolution")
    parser.add_argument("--height", type=even_int, default=1060)
    parser.add_argument("--width", type=even_int, default=1900)
    parser.add_argument("--json", action="store_true", help="emit one JSON document instead of a table")
    parser.add_argument("--csv", type=Path, help="also write the cost report as CSV")
    parser.add_argument("--attention-report", action="store_true",
                        help="add the per-module attention cost comparison")
    add_config_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    model, _ = resolve_configs(settings, args)
    report = count_macs(model, args.height, args.width)
    attention = count_attention(model, args.height, args.width) if args.attention_report else None
    if args.csv is not None:
        with stage("write_csv"):
            atomic_write_bytes(args.csv, cost_csv(report).encode("utf-8"))
    if args.json:
        print(ProfileDocument(cost=report, attention=attention).model_dump_json(indent=2))
    else:
        print(cost_table(report, attention), end="")
    return 0
