"""
cenhdr command-line interface

Subcommands:
    merge     three LDR frames + exposures + weights → PFM (and optional tone-mapped PNG)
    train     train on a scene directory dataset, with or without distillation
    eval      score a dataset with PSNR / mu-PSNR / SSIM / mu-SSIM
    profile   parameter and MAC accounting
    bench     runtime benchmark of the full inference pipeline

Exit codes: 0 success, 1 runtime failure ("<stage>: <message>" on stderr),
2 usage error. Logs go to stderr; results go to stdout or files.

Usage:
    python -m apps.cli profile --height 1060 --width 1900
"""

from typing import Optional, Sequence
import argparse
import sys

from apps.cli.commands import bench, evaluate, merge, profile, train
from apps.cli.common import StageFailed
from apps.core.config import get_settings
from apps.core.errors import CenHdrError
from apps.core.kernels.parallel import set_thread_limit
from apps.core.observability.logging import configure_structlog, get_logger

logger = get_logger(__name__)

COMMANDS = (merge, train, evaluate, profile, bench)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cenhdr",
        description="Multi-exposure HDR merging network: inference, training, evaluation, profiling.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        command.register(sub)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = get_settings()
    except CenHdrError as exc:
        print(f"config: {exc}", file=sys.stderr)
        return 1

    configure_structlog(
        settings.observability.log_level,
        service=args.command,
        log_format=settings.observability.log_format,
    )
    set_thread_limit(settings.runtime.threads)

    try:
        return args.handler(args, settings)
    except StageFailed as exc:
        logger.error("command_failed", command=args.command, stage=exc.stage, error=str(exc.cause))
        print(f"{exc.stage}: {exc.cause}", file=sys.stderr)
        return 1
    except CenHdrError as exc:
        logger.error("command_failed", command=args.command, error=str(exc), error_code=exc.error_code)
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
