"""
File emitters for benchmark and analysis artifacts.

CSV files are written through pandas with 17 significant digits and LF line
endings so identical runs produce identical bytes. SVG figures are plain
hand-written markup.
"""

import json
import logging
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Union
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd

from fraudbench.data.preprocess import CorrelationMatrix, Histogram, PreprocessResult
from fraudbench.errors import EmitError
from fraudbench.protocol import BenchmarkTable, RocPoint
from fraudbench.reduction.embedding import Embedding2D

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
SVG_WIDTH = 640
SVG_HEIGHT = 480
SVG_PADDING = 40
AXIS_MARGIN = 0.05
CLASS_COLORS = {0: "#1f77b4", 1: "#d62728"}
CURVE_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")

PathLike = Union[str, Path]


def _write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from None
    return path


def write_frame(frame: pd.DataFrame, path: PathLike, index: bool = False, index_label=None) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(
            path, index=index, index_label=index_label, float_format=FLOAT_FORMAT, lineterminator="\n"
        )
    except OSError as exc:
        raise EmitError(f"cannot write {path}: {exc}") from None
    return path


def write_records(records: Sequence[Mapping[str, Any]], path: PathLike) -> Path:
    if not records:
        raise EmitError(f"nothing to write to {path}")
    return write_frame(pd.DataFrame(list(records)), path)


# --- scatter ------------------------------------------------------------------


def _axis_transform(values: np.ndarray, lo_px: float, hi_px: float):
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    if span == 0.0:
        span = 1.0
    lo -= AXIS_MARGIN * span
    hi += AXIS_MARGIN * span
    return lambda v: lo_px + (v - lo) / (hi - lo) * (hi_px - lo_px)


def _svg_document(body: List[str], title: str, style: str) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f"<title>{escape(title)}</title>",
        f"<style>{style}</style>",
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<rect x="{SVG_PADDING}" y="{SVG_PADDING}" width="{SVG_WIDTH - 2 * SVG_PADDING}" '
        f'height="{SVG_HEIGHT - 2 * SVG_PADDING}" fill="none" stroke="#444"/>',
    ]
    return "\n".join(head + body + ["</svg>", ""])


def emit_scatter_svg(emb: Embedding2D, path: PathLike, title: Optional[str] = None) -> Path:
    """
    Scatter plot of a 2-D embedding, one <circle> per point with class
    attribute "class-0" or "class-1". The raw points go to a companion CSV
    next to the SVG.
    """
    path = Path(path)
    if len(emb) == 0:
        raise EmitError(f"refusing to write an empty embedding to {path}")

    to_x = _axis_transform(emb.points[:, 0], SVG_PADDING, SVG_WIDTH - SVG_PADDING)
    to_y = _axis_transform(emb.points[:, 1], SVG_HEIGHT - SVG_PADDING, SVG_PADDING)
    circles = [
        f'<circle class="class-{int(label)}" cx="{to_x(x):.3f}" cy="{to_y(y):.3f}" r="3"/>'
        for (x, y), label in zip(emb.points, emb.labels)
    ]
    style = " ".join(
        f".class-{c} {{ fill: {color}; fill-opacity: 0.6; }}" for c, color in CLASS_COLORS.items()
    )
    caption = title or f"{emb.method.value} embedding ({len(emb)} points)"
    body = [f'<text x="{SVG_PADDING}" y="{SVG_PADDING - 12}" font-size="14">{escape(caption)}</text>']
    body += circles
    _write_text(path, _svg_document(body, caption, style))
    write_frame(emb.to_frame(), path.with_suffix(".csv"))
    logger.debug(f"Wrote {len(emb)}-point scatter to {path}")
    return path


# --- correlation --------------------------------------------------------------


def emit_correlation_csv(cm: CorrelationMatrix, path: PathLike) -> Path:
    """Square grid with the column names as header row and first column."""
    return write_frame(cm.to_frame(), path, index=True, index_label="")


def read_correlation_csv(path: PathLike) -> CorrelationMatrix:
    frame = pd.read_csv(path, index_col=0)
    return CorrelationMatrix(tuple(frame.columns), frame.to_numpy(dtype=np.float64))


def emit_correlation_with_class(
    imbalanced: CorrelationMatrix, balanced: Optional[CorrelationMatrix], path: PathLike
) -> Path:
    """Each feature's correlation with Class, sorted by absolute balanced value when available."""
    before = imbalanced.with_class()
    frame = pd.DataFrame({"feature": list(before), "imbalanced": list(before.values())})
    if balanced is not None:
        after = balanced.with_class()
        frame["balanced"] = [after.get(f, np.nan) for f in frame["feature"]]
        key = frame["balanced"].abs()
    else:
        key = frame["imbalanced"].abs()
    frame = frame.assign(_key=key).sort_values("_key", ascending=False, kind="mergesort")
    return write_frame(frame.drop(columns="_key"), path)


# --- distribution summaries ---------------------------------------------------


def emit_histograms(histograms: Iterable[Histogram], directory: PathLike) -> List[Path]:
    directory = Path(directory)
    return [
        write_frame(h.to_frame(), directory / f"hist_{h.feature}_{h.stage}.csv") for h in histograms
    ]


# --- ROC ------------------------------------------------------------------------


def emit_roc_csv(points: Sequence[RocPoint], path: PathLike) -> Path:
    frame = pd.DataFrame([tuple(p) for p in points], columns=["fpr", "tpr", "threshold"])
    return write_frame(frame, path)


def read_roc_csv(path: PathLike) -> List[RocPoint]:
    frame = pd.read_csv(path, dtype=np.float64)
    return [RocPoint(float(r.fpr), float(r.tpr), float(r.threshold)) for r in frame.itertuples()]


def emit_roc_svg(curves: Mapping[str, Sequence[RocPoint]], path: PathLike, aucs: Optional[Mapping[str, float]] = None) -> Path:
    """All models' ROC curves in one figure, with the chance diagonal."""
    if not curves:
        raise EmitError(f"no ROC curves to write to {path}")
    x0, x1 = SVG_PADDING, SVG_WIDTH - SVG_PADDING
    y0, y1 = SVG_HEIGHT - SVG_PADDING, SVG_PADDING

    def px(fpr, tpr):
        return f"{x0 + fpr * (x1 - x0):.3f},{y0 + tpr * (y1 - y0):.3f}"

    body = [
        f'<polyline class="diagonal" points="{px(0, 0)} {px(1, 1)}" fill="none" stroke="#999" stroke-dasharray="4 4"/>'
    ]
    for i, (name, points) in enumerate(curves.items()):
        color = CURVE_COLORS[i % len(CURVE_COLORS)]
        coords = " ".join(px(p.fpr, p.tpr) for p in points)
        body.append(
            f'<polyline class="roc" data-model="{escape(name)}" points="{coords}" fill="none" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        label = name if aucs is None or name not in aucs else f"{name} (AUC {aucs[name]:.4f})"
        ly = y1 + 20 + 18 * i
        body.append(f'<text x="{x1 - 200}" y="{ly}" font-size="12" fill="{color}">{escape(label)}</text>')
    body.append(f'<text x="{SVG_WIDTH / 2 - 60}" y="{SVG_HEIGHT - 10}" font-size="12">false positive rate</text>')
    body.append(f'<text x="8" y="{SVG_PADDING - 12}" font-size="12">true positive rate</text>')
    return _write_text(path, _svg_document(body, "ROC curves", ""))


# --- benchmark tables -----------------------------------------------------------


def metrics_frame(table: BenchmarkTable) -> pd.DataFrame:
    records = []
    for row in table.rows:
        record = {"model": row.model}
        if row.report is not None:
            record.update(row.report.to_record())
        else:
            record.update(precision=row.precision, recall=row.recall, f1=row.f1, roc_auc=row.roc_auc)
        record["hyperparameters"] = json.dumps(row.hyperparameters, sort_keys=True)
        record["fingerprint"] = table.fingerprint
        records.append(record)
    return pd.DataFrame(records)


def emit_metrics_csv(table: BenchmarkTable, path: PathLike) -> Path:
    return write_frame(metrics_frame(table), path)


def markdown_table(table: BenchmarkTable) -> str:
    lines = [
        "| Model | Precision | Recall | F1 Score | ROC AUC |",
        "|---|---|---|---|---|",
    ]
    for row in table.rows:
        lines.append(f"| {row.model} | {row.precision:.4f} | {row.recall:.4f} | {row.f1:.4f} | {row.roc_auc:.4f} |")
    lines += [
        "",
        "Precision, recall and F1 are macro averages over both classes.",
        "",
        f"Stage order: {' -> '.join(table.stage_order)}",
        "",
        f"Config fingerprint: `{table.fingerprint}`",
        "",
    ]
    return "\n".join(lines)


def emit_markdown_table(table: BenchmarkTable, path: PathLike) -> Path:
    return _write_text(path, markdown_table(table))


def emit_json(payload: Mapping[str, Any], path: PathLike) -> Path:
    return _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def model_file_name(name: str) -> str:
    return f"{name}.fbm"


def roc_file_name(name: str) -> str:
    return f"roc_{name}.csv"


# --- preprocessing reports ------------------------------------------------------


def emit_preprocess_reports(result: PreprocessResult, directory: PathLike) -> List[Path]:
    """Class counts, correlation matrices, outlier bounds and distribution summaries."""
    directory = Path(directory)
    written = [write_records(result.class_count_records(), directory / "class_counts.csv")]
    if result.correlation_imbalanced is not None:
        written.append(emit_correlation_csv(result.correlation_imbalanced, directory / "correlation_imbalanced.csv"))
        written.append(
            emit_correlation_with_class(
                result.correlation_imbalanced, result.correlation_balanced, directory / "correlation_with_class.csv"
            )
        )
    if result.correlation_balanced is not None:
        written.append(emit_correlation_csv(result.correlation_balanced, directory / "correlation_balanced.csv"))
    if result.outliers is not None and result.outliers.bounds:
        written.append(write_records(result.outliers.to_records(), directory / "outliers.csv"))
    if result.box_summaries:
        written.append(write_records(result.box_summaries, directory / "boxplot_summary.csv"))
    written += emit_histograms(result.histograms, directory)
    return written
