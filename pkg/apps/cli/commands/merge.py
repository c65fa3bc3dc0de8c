"""`merge`: three LDR frames + exposure file + weights → HDR PFM."""

from pathlib import Path
from typing import Dict
import argparse

from apps.adapters.dataset.scenes import read_exposures
from apps.adapters.images.ldr import read_ldr, write_tonemapped
from apps.adapters.images.pfm import write_hdr
from apps.adapters.weights.container import load_weights
from apps.cli.common import stage
from apps.core.config import Settings, merge_model_config
from apps.core.domain.bracket import ExposureBracket
from apps.core.observability.logging import get_logger
from apps.core.services.pipeline import predict

logger = get_logger(__name__)


def register(sub: argparse._SubParsersAction) -> None:
    parser = sub.add_parser("merge", help="merge one exposure bracket into an HDR image")
    parser.add_argument("--inputs", nargs=3, type=Path, required=True, metavar=("SHORT", "MID", "LONG"),
                        help="LDR frames ordered by increasing exposure (PNG or PPM)")
    parser.add_argument("--exposures", type=Path, required=True, help="text file with three EV values")
    parser.add_argument("--weights", type=Path, required=True, help="weight container (.cenh)")
    parser.add_argument("--out", type=Path, required=True, help="output HDR (.pfm)")
    parser.add_argument("--tonemapped", type=Path, help="optional mu-law tone-mapped PNG")
    parser.add_argument("--gamma", type=float, help="gamma of the LDR frames (default from weights config)")
    parser.add_argument("--mu", type=float, default=5000.0, help="mu-law compression (default 5000)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    timings: Dict[str, float] = {}
    with stage("read_inputs", timings):
        frames = tuple(read_ldr(path) for path in args.inputs)
        evs = read_exposures(args.exposures)
        bracket = ExposureBracket.from_evs(frames, evs, name=args.inputs[1].stem)
    with stage("read_weights", timings):
        weights, config = load_weights(args.weights)
        config = merge_model_config(config, gamma=args.gamma)
    with stage("predict", timings):
        hdr = predict(bracket, weights, config, timings=timings)
    with stage("write_hdr", timings):
        write_hdr(args.out, hdr.pixels)
    if args.tonemapped is not None:
        with stage("write_tonemapped", timings):
            write_tonemapped(args.tonemapped, hdr.pixels, args.mu)

    logger.info("merge_completed", out=str(args.out), height=bracket.height, width=bracket.width)
    width = max(len(name) for name in timings)
    for name, seconds in timings.items():
        print(f"{name.ljust(width)}  {seconds:.4f} s")
    return 0
