"""
Scene-set evaluation: run the network at full resolution on each scene and
score it against ground truth with PSNR, mu-PSNR, SSIM and mu-SSIM.
"""

from typing import Callable, Optional, Sequence, Union

import numpy as np

from apps.core.config import ModelConfig
from apps.core.domain.bracket import ExposureBracket, SceneSample
from apps.core.domain.reports import MetricReport, MetricRow
from apps.core.domain.weights import ModelWeights
from apps.core.errors import MetricError
from apps.core.observability.logging import LogContext, get_logger
from apps.core.observability.metrics import scenes_evaluated_total, scenes_skipped_total
from apps.core.services import fidelity
from apps.core.services.pipeline import predict

logger = get_logger(__name__)

Predictor = Callable[[ExposureBracket], np.ndarray]


def score(pred: np.ndarray, gt: np.ndarray, scene: str, mu: float = 5000.0) -> MetricRow:
    return MetricRow(
        scene=scene,
        mu_psnr=fidelity.mu_psnr(pred, gt, mu),
        psnr=fidelity.psnr(pred, gt),
        mu_ssim=fidelity.mu_ssim(pred, gt, mu),
        ssim=fidelity.ssim(pred, gt),
    )


def evaluate(
    dataset: Sequence[Union[SceneSample, ExposureBracket]],
    weights: Optional[ModelWeights],
    config: ModelConfig,
    mu: float = 5000.0,
    predictor: Optional[Predictor] = None,
) -> MetricReport:
    """
    Score every scene that has ground truth; others are skipped with a warning.

    `predictor` replaces the network (e.g. to score stored predictions).

    Raises:
        MetricError: no scene could be scored
    """
    if predictor is None:
        if weights is None:
            raise MetricError("evaluate needs weights or a predictor")
        predictor = lambda bracket: predict(bracket, weights, config).pixels  # noqa: E731

    rows, skipped = [], []
    for item in dataset:
        bracket = item.bracket if isinstance(item, SceneSample) else item
        with LogContext(scene=bracket.name):
            if bracket.gt_hdr is None:
                skipped.append(bracket.name)
                scenes_skipped_total.labels(reason="missing_gt").inc()
                logger.warning("scene_skipped", reason="missing_gt")
                continue
            pred = predictor(bracket)
            try:
                row = score(pred, bracket.gt_hdr, bracket.name, mu)
            except MetricError as exc:
                skipped.append(bracket.name)
                scenes_skipped_total.labels(reason="unscorable").inc()
                logger.warning("scene_skipped", reason="unscorable", detail=str(exc))
                continue
            rows.append(row)
            scenes_evaluated_total.inc()
            logger.info("scene_evaluated", mu_psnr=row.mu_psnr, psnr=row.psnr,
                        mu_ssim=row.mu_ssim, ssim=row.ssim)

    if not rows:
        raise MetricError(f"no scene could be evaluated ({len(skipped)} skipped)")
    return MetricReport(rows=rows, skipped=skipped)
