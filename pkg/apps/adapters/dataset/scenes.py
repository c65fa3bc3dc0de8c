"""
Scene directory dataset adapter.

Layout:
    <root>/<scene>/input_1.(png|ppm)
                   input_2.(png|ppm)      reference
                   input_3.(png|ppm)
                   exposure.txt            three EV values, one per line
                   gt.pfm
                   teacher.pfm             optional

Teacher predictions may instead live under a separate directory as
<teacher_dir>/<scene>/teacher.pfm or <teacher_dir>/<scene>.pfm. They are
only opened when `with_teacher` is set.

Scenes missing a mandatory file, or whose files fail to parse, are skipped
with a warning; an empty result raises DatasetError.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

from apps.adapters.images.ldr import PNG_SUFFIXES, PPM_SUFFIXES, read_ldr
from apps.adapters.images.pfm import read_pfm
from apps.core.domain.bracket import ExposureBracket, SceneSample
from apps.core.errors import BracketError, DatasetError, ImageFormatError
from apps.core.observability.logging import get_logger
from apps.core.observability.metrics import scenes_skipped_total

logger = get_logger(__name__)

INPUT_STEMS = ("input_1", "input_2", "input_3")
EXPOSURE_FILE = "exposure.txt"
GT_FILE = "gt.pfm"
TEACHER_FILE = "teacher.pfm"


def read_exposures(path: Path) -> Tuple[float, float, float]:
    """Three EV values, one per non-blank line."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) != 3:
        raise BracketError(f"{path}: expected three EV lines, got {len(lines)}")
    try:
        evs = tuple(float(ln) for ln in lines)
    except ValueError as exc:
        raise BracketError(f"{path}: EV values must be numbers: {exc}") from exc
    return evs  # type: ignore[return-value]


def find_input(scene_dir: Path, stem: str) -> Optional[Path]:
    for suffix in PNG_SUFFIXES + PPM_SUFFIXES:
        candidate = scene_dir / f"{stem}{suffix}"
        if candidate.is_file():
            return candidate
    return None


@dataclass
class SceneDirectoryLoader:
    root: Path
    with_teacher: bool = False
    teacher_dir: Optional[Path] = None
    skipped: List[Tuple[str, str]] = field(default_factory=list)

    def teacher_path(self, scene_dir: Path) -> Optional[Path]:
        if self.teacher_dir is not None:
            candidates = [
                self.teacher_dir / scene_dir.name / TEACHER_FILE,
                self.teacher_dir / f"{scene_dir.name}.pfm",
            ]
        else:
            candidates = [scene_dir / TEACHER_FILE]
        return next((c for c in candidates if c.is_file()), None)

    def load(self) -> List[SceneSample]:
        root = Path(self.root)
        if not root.is_dir():
            raise DatasetError(f"dataset root {root} is not a directory")
        self.skipped = []
        samples: List[SceneSample] = []
        for scene_dir in sorted(p for p in root.iterdir() if p.is_dir()):
            sample = self._load_scene(scene_dir)
            if sample is not None:
                samples.append(sample)
        if not samples:
            raise DatasetError(
                f"no usable scenes under {root} ({len(self.skipped)} skipped)"
            )
        logger.info(
            "dataset_loaded",
            root=str(root),
            scenes=len(samples),
            skipped=len(self.skipped),
            with_teacher=self.with_teacher,
        )
        return samples

    def _skip(self, scene: str, reason: str, detail: str) -> None:
        self.skipped.append((scene, reason))
        scenes_skipped_total.labels(reason=reason).inc()
        logger.warning("scene_skipped", scene=scene, reason=reason, detail=detail)

    def _load_scene(self, scene_dir: Path) -> Optional[SceneSample]:
        scene = scene_dir.name
        inputs = [find_input(scene_dir, stem) for stem in INPUT_STEMS]
        if any(p is None for p in inputs):
            missing = [s for s, p in zip(INPUT_STEMS, inputs) if p is None]
            self._skip(scene, "missing_input", ", ".join(missing))
            return None
        exposure = scene_dir / EXPOSURE_FILE
        if not exposure.is_file():
            self._skip(scene, "missing_exposure", str(exposure))
            return None
        gt_path = scene_dir / GT_FILE
        if not gt_path.is_file():
            self._skip(scene, "missing_gt", str(gt_path))
            return None
        teacher_path = None
        if self.with_teacher:
            teacher_path = self.teacher_path(scene_dir)
            if teacher_path is None:
                self._skip(scene, "missing_teacher", scene)
                return None

        try:
            evs = read_exposures(exposure)
            ldr = [read_ldr(p) for p in inputs]  # type: ignore[arg-type]
            gt = read_pfm(gt_path)
            teacher = read_pfm(teacher_path) if teacher_path is not None else None
            bracket = ExposureBracket.from_evs(ldr, evs, gt_hdr=gt, teacher_hdr=teacher, name=scene)
        except (ImageFormatError, BracketError) as exc:
            self._skip(scene, "invalid", str(exc))
            return None
        return SceneSample(bracket, source=scene_dir)


def load_dataset(
    root: Path,
    with_teacher: bool = False,
    teacher_dir: Optional[Path] = None,
) -> List[SceneSample]:
    return SceneDirectoryLoader(Path(root), with_teacher, teacher_dir).load()
