"""
Prometheus Metrics

Process-level counters for training, evaluation and inference. They are
always recorded; they are only exported when an HTTP exporter is started
(`train --metrics-port`).

Usage:
    from apps.core.observability.metrics import train_steps_total, stage_timer

    train_steps_total.inc()
    with stage_timer("forward"):
        ...
"""

from contextlib import contextmanager
import time

from prometheus_client import Counter, Gauge, Histogram, Info, start_http_server


app_info = Info('cenhdr_app', 'HDR merging network build info')
app_info.info({
    'version': '1.0.0',
})

# Training
train_steps_total = Counter(
    'cenhdr_train_steps_total',
    'Optimizer steps performed',
)

train_loss = Gauge(
    'cenhdr_train_loss',
    'Loss of the most recent optimizer step',
)

checkpoints_written_total = Counter(
    'cenhdr_checkpoints_written_total',
    'Weight checkpoints written during training',
)

# Pipeline stages (read, assemble, forward, tonemap, write, ...)
stage_duration_seconds = Histogram(
    'cenhdr_stage_duration_seconds',
    'Wall time per pipeline stage',
    ['stage'],
)

# Datasets / evaluation
scenes_skipped_total = Counter(
    'cenhdr_scenes_skipped_total',
    'Scenes skipped while loading or evaluating',
    ['reason'],
)

scenes_evaluated_total = Counter(
    'cenhdr_scenes_evaluated_total',
    'Scenes scored by the evaluator',
)


@contextmanager
def stage_timer(stage: str, timings: dict | None = None):
    """Observe the duration of a block; optionally record it in `timings`."""
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        stage_duration_seconds.labels(stage=stage).observe(elapsed)
        if timings is not None:
            timings[stage] = timings.get(stage, 0.0) + elapsed


def start_exporter(port: int) -> None:
    """Expose the default registry on http://0.0.0.0:<port>/metrics."""
    start_http_server(port)
