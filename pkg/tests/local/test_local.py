#!/usr/bin/env python3
"""Local Smoke Test

Runs the whole workflow on a throwaway synthetic dataset: seed scenes,
train a narrow model for a few steps, merge one bracket, evaluate, profile.
No network, no GPU, finishes in seconds.

Usage:
    python tests/local/test_local.py
    pytest tests/local/test_local.py
"""

import sys
import tempfile
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

import numpy as np  # noqa: E402

from apps.adapters.images.pfm import read_pfm  # noqa: E402
from apps.cli.main import main  # noqa: E402
from scripts.seed_dev import seed  # noqa: E402

TINY_MODEL = (
    "encoder_widths: [4, 8]\n"
    "merge_width: 16\n"
    "scram_spatial_channels: 3\n"
    "scram_hidden: [6, 6, 6]\n"
)


def print_header(title):
    print("\n" + "=" * 70)
    print(f"  {title}")
    print("=" * 70)


def run_workflow(workdir: Path) -> None:
    data = workdir / "data"
    config = workdir / "tiny.yaml"
    config.write_text(TINY_MODEL)
    weights = workdir / "tiny.cenh"

    print_header("STEP 1: Seed synthetic scenes")
    seed(data, scenes=2, height=20, width=28, seed_value=0, teacher=True)
    print(f"✓ scenes: {sorted(p.name for p in data.iterdir())}")

    print_header("STEP 2: Train (knowledge distillation, 3 steps)")
    code = main(["train", "--data", str(data), "--out", str(weights), "--config", str(config),
                 "--patch-size", "8", "--stride", "8", "--batch-size", "4", "--max-steps", "3"])
    assert code == 0, "train failed"
    print(f"✓ weights written: {weights.stat().st_size} bytes")

    print_header("STEP 3: Merge one bracket")
    scene = data / "scene_000"
    out = workdir / "merged.pfm"
    code = main(["merge", "--inputs", *(str(scene / f"input_{i}.png") for i in (1, 2, 3)),
                 "--exposures", str(scene / "exposure.txt"), "--weights", str(weights),
                 "--out", str(out), "--tonemapped", str(workdir / "merged.png")])
    assert code == 0, "merge failed"
    hdr = read_pfm(out)
    assert hdr.shape == (20, 28, 3) and np.all(np.isfinite(hdr))
    print(f"✓ HDR {hdr.shape[1]}x{hdr.shape[0]}, max {hdr.max():.4f}")

    print_header("STEP 4: Evaluate")
    assert main(["eval", "--data", str(data), "--weights", str(weights)]) == 0

    print_header("STEP 5: Profile default network")
    assert main(["profile", "--height", "1060", "--width", "1900"]) == 0


def test_local_workflow(tmp_path):
    run_workflow(tmp_path)


if __name__ == "__main__":
    with tempfile.TemporaryDirectory() as tmp:
        run_workflow(Path(tmp))
    print("\n✅ local workflow completed")
