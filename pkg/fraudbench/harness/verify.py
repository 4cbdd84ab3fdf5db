"""
Cross-check of an emitted benchmark: every value in metrics.csv is recomputed
from the model's ROC CSV, its decision threshold and the class supports.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Union

import pandas as pd

from fraudbench.errors import EmitError
from fraudbench.harness.emit import read_roc_csv, roc_file_name
from fraudbench.protocol import ConfusionMatrix, RocPoint
from fraudbench.validator.metrics import macro_average, per_class_metrics, trapezoid_auc

logger = logging.getLogger(__name__)

VERIFY_TOLERANCE = 1e-9
CHECKED_COLUMNS = ("precision", "recall", "f1", "roc_auc", "tp", "fp", "tn", "fn")


@dataclass(frozen=True)
class Mismatch:
    model: str
    column: str
    recorded: float
    recomputed: float

    def __str__(self) -> str:
        return f"{self.model}.{self.column}: table has {self.recorded!r}, ROC curve gives {self.recomputed!r}"


def confusion_at_threshold(points: Sequence[RocPoint], threshold: float, n_pos: int, n_neg: int) -> ConfusionMatrix:
    """
    Tallies at `threshold` read off the curve: the predicted-positive set at
    any threshold equals the one at the smallest curve threshold >= it.
    """
    eligible = [p for p in points if p.threshold >= threshold]
    if not eligible:
        raise EmitError(f"ROC curve has no point at or above threshold {threshold}")
    point = min(eligible, key=lambda p: p.threshold)
    tp = int(round(point.tpr * n_pos))
    fp = int(round(point.fpr * n_neg))
    return ConfusionMatrix(tp=tp, fp=fp, tn=n_neg - fp, fn=n_pos - tp)


def verify_run(directory: Union[str, Path], tol: float = VERIFY_TOLERANCE) -> List[Mismatch]:
    directory = Path(directory)
    metrics_path = directory / "metrics.csv"
    if not metrics_path.is_file():
        raise EmitError(f"{metrics_path}: not found")
    frame = pd.read_csv(metrics_path)

    mismatches: List[Mismatch] = []
    for row in frame.itertuples(index=False):
        roc_path = directory / roc_file_name(row.model)
        if not roc_path.is_file():
            raise EmitError(f"{roc_path}: not found")
        points = read_roc_csv(roc_path)
        cm = confusion_at_threshold(points, float(row.threshold), int(row.n_pos), int(row.n_neg))
        macro = macro_average(per_class_metrics(cm))
        recomputed = {
            "precision": macro.precision,
            "recall": macro.recall,
            "f1": macro.f1,
            "roc_auc": trapezoid_auc(points),
            "tp": cm.tp,
            "fp": cm.fp,
            "tn": cm.tn,
            "fn": cm.fn,
        }
        for column in CHECKED_COLUMNS:
            recorded = float(getattr(row, column))
            if not math.isclose(recorded, recomputed[column], rel_tol=0.0, abs_tol=tol):
                mismatches.append(Mismatch(row.model, column, recorded, float(recomputed[column])))
        logger.info(f"Verified {row.model} against {roc_path.name}")
    return mismatches
