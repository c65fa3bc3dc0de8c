"""Text and CSV renderings of cost and metric reports."""

from typing import Iterable, List, Optional, Sequence
import csv
import io
import math

from apps.core.domain.reports import (
    REFERENCE_FPS,
    REFERENCE_RUNTIME_S,
    METRIC_COLUMNS,
    AttentionCostRow,
    CostReport,
    MetricReport,
    MetricRow,
    RuntimeStats,
)


def _aligned(header: Sequence[str], rows: Iterable[Sequence[str]]) -> List[str]:
    rows = [list(r) for r in rows]
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    fmt = lambda cells: "  ".join(  # noqa: E731
        c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))
    ).rstrip()
    return [fmt(header), fmt(["-" * w for w in widths])] + [fmt(r) for r in rows]


def _shape(shape: Sequence[int]) -> str:
    return "x".join(str(d) for d in shape)


def format_gmacs(macs: int) -> str:
    return f"{macs / 1e9:.2f}"


# ─── Cost ───────────────────────────────────────────────────────────────────

def cost_table(report: CostReport, attention: Optional[List[AttentionCostRow]] = None) -> str:
    lines = []
    if report.height is not None:
        lines.append(f"input: {report.width}x{report.height}  attention: {report.attention}")
    lines += _aligned(
        ("layer", "output", "x", "params", "MACs"),
        (
            (r.layer, _shape(r.output_shape), str(r.applications), str(r.params), str(r.macs))
            for r in report.rows
        ),
    )
    lines.append("")
    lines.append(f"total params: {report.total_params}")
    if report.height is not None:
        lines.append(f"total GMACs: {format_gmacs(report.total_macs)}")
    if attention:
        lines.append("")
        lines.append("attention module cost (one non-reference frame, H/2 x W/2):")
        lines += _aligned(
            ("module", "params", "MACs", "GMACs"),
            ((a.module, str(a.params), str(a.macs), format_gmacs(a.macs)) for a in attention),
        )
    if report.runtime is not None:
        lines.append("")
        lines += runtime_lines(report.runtime)
    if report.notes:
        lines.append("")
        lines += [f"# {note}" for note in report.notes]
    return "\n".join(lines) + "\n"


def cost_csv(report: CostReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("layer", "output_shape", "applications", "params", "macs"))
    for r in report.rows:
        writer.writerow((r.layer, _shape(r.output_shape), r.applications, r.params, r.macs))
    writer.writerow(("total", "", "", report.total_params, report.total_macs))
    if report.runtime is not None:
        stats = report.runtime
        writer.writerow(())
        writer.writerow(("runtime", "value"))
        for key in ("height", "width", "runs", "warmup", "mean_s", "std_s", "fps"):
            writer.writerow((key, getattr(stats, key)))
    return buf.getvalue()


def runtime_lines(stats: RuntimeStats) -> List[str]:
    lines = [
        f"runtime: {stats.width}x{stats.height}, {stats.runs} runs after {stats.warmup} warm-up",
        f"mean: {stats.mean_s:.6f} s  std: {stats.std_s:.6f} s  fps: {stats.fps:.2f}",
        "timings (s): " + " ".join(f"{t:.6f}" for t in stats.timings_s[:10])
        + (" ..." if len(stats.timings_s) > 10 else ""),
    ]
    lines += [f"{key}: {value}" for key, value in sorted(stats.machine.items())]
    lines.append(
        f"# reference runtime {REFERENCE_RUNTIME_S} s / {REFERENCE_FPS} FPS was measured on a "
        "dedicated neural accelerator and is not expected to reproduce here"
    )
    return lines


# ─── Metrics ────────────────────────────────────────────────────────────────

def _metric(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return f"{value:.4f}"


def _metric_cells(row: MetricRow) -> List[str]:
    return [row.scene] + [_metric(getattr(row, col)) for col in METRIC_COLUMNS[1:]]


def metric_table(report: MetricReport) -> str:
    rows = [_metric_cells(r) for r in report.rows] + [_metric_cells(report.mean)]
    lines = _aligned(METRIC_COLUMNS, rows)
    if report.skipped:
        lines.append(f"# skipped: {', '.join(report.skipped)}")
    return "\n".join(lines) + "\n"


def metric_csv(report: MetricReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for row in [*report.rows, report.mean]:
        writer.writerow(_metric_cells(row))
    return buf.getvalue()
