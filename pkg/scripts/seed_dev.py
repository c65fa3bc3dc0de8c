"""
Synthesize a desk-scale dataset in the scene directory layout.

Each scene gets a smooth synthetic HDR radiance map with a few bright
blobs, three 8-bit LDR frames derived from it by inverting the gamma
projection (L = clip((H·t)^(1/gamma), 0, 1)), the EV file, gt.pfm and,
with --teacher, a slightly perturbed teacher.pfm.

Usage:
    python scripts/seed_dev.py --out data/dev --scenes 4 --height 64 --width 96 --teacher
"""

from pathlib import Path
from typing import Sequence, Tuple
import argparse
import os
import sys

import cv2
import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from apps.adapters.dataset.scenes import EXPOSURE_FILE, GT_FILE, INPUT_STEMS, TEACHER_FILE  # noqa: E402
from apps.adapters.images.ldr import write_ldr  # noqa: E402
from apps.adapters.images.pfm import write_pfm  # noqa: E402
from apps.adapters.storage import atomic_write_bytes  # noqa: E402
from apps.core.domain.bracket import ev_to_time  # noqa: E402
from apps.core.observability.logging import configure_structlog, get_logger  # noqa: E402

logger = get_logger(__name__)

DEFAULT_EVS = (-2.0, 0.0, 2.0)


def synthetic_radiance(height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth low-frequency field in [0.01, 1] plus bright blobs up to ~16."""
    base = rng.random((max(2, height // 8), max(2, width // 8), 3)).astype(np.float32)
    base = cv2.resize(base, (width, height), interpolation=cv2.INTER_CUBIC)
    hdr = 0.01 + 0.99 * np.clip(base, 0.0, 1.0)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float32)
    for _ in range(int(rng.integers(1, 4))):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        radius = rng.uniform(2.0, max(3.0, min(height, width) / 4))
        blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * radius ** 2))
        hdr += (rng.uniform(2.0, 15.0) * blob)[..., None]
    return hdr.astype(np.float32)


def ldr_frames(hdr: np.ndarray, evs: Sequence[float], gamma: float = 2.2) -> Tuple[np.ndarray, ...]:
    return tuple(
        np.clip(hdr * ev_to_time(ev), 0.0, 1.0) ** (1.0 / gamma) for ev in evs
    )


def write_scene(
    root: Path,
    name: str,
    height: int,
    width: int,
    rng: np.random.Generator,
    evs: Sequence[float] = DEFAULT_EVS,
    teacher: bool = False,
    gamma: float = 2.2,
    suffix: str = ".png",
) -> Path:
    scene_dir = Path(root) / name
    scene_dir.mkdir(parents=True, exist_ok=True)
    hdr = synthetic_radiance(height, width, rng)
    for stem, frame in zip(INPUT_STEMS, ldr_frames(hdr, evs, gamma)):
        write_ldr(scene_dir / f"{stem}{suffix}", frame)
    atomic_write_bytes(scene_dir / EXPOSURE_FILE, "".join(f"{ev}\n" for ev in evs).encode("ascii"))
    write_pfm(scene_dir / GT_FILE, hdr)
    if teacher:
        noise = rng.normal(1.0, 0.05, hdr.shape).astype(np.float32)
        write_pfm(scene_dir / TEACHER_FILE, np.clip(hdr * noise, 0.0, None))
    return scene_dir


def seed(out: Path, scenes: int, height: int, width: int, seed_value: int, teacher: bool) -> None:
    rng = np.random.default_rng(seed_value)
    for i in range(scenes):
        scene_dir = write_scene(out, f"scene_{i:03d}", height, width, rng, teacher=teacher)
        logger.info("scene_written", scene=scene_dir.name, height=height, width=width, teacher=teacher)


def main() -> int:
    parser = argparse.ArgumentParser(description="Write synthetic HDR scenes for local training runs.")
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--scenes", type=int, default=4)
    parser.add_argument("--height", type=int, default=64)
    parser.add_argument("--width", type=int, default=96)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--teacher", action="store_true", help="also write teacher.pfm per scene")
    args = parser.parse_args()

    configure_structlog("INFO", service="seed_dev")
    seed(args.out, args.scenes, args.height, args.width, args.seed, args.teacher)
    print(f"wrote {args.scenes} scenes to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
