import enum
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np
import pandas as pd

from fraudbench.errors import ReductionError
from fraudbench.numerics.kernels import squared_distances


class ReductionMethod(str, enum.Enum):
    TSNE = "tsne"
    PCA = "pca"
    TRUNCATED_SVD = "tsvd"


@dataclass(frozen=True)
class Embedding2D:
    """
    Two-dimensional projection of a dataset.

    `labels` are carried through untouched for plotting; `diagnostics` holds
    method-specific values (explained variance, singular values or KL).
    """

    points: np.ndarray
    labels: np.ndarray
    method: ReductionMethod
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if points.ndim != 2 or points.shape[1] != 2:
            raise ReductionError(f"embedding must be n x 2, got {points.shape}")
        if points.shape[0] != labels.shape[0]:
            raise ReductionError(f"{points.shape[0]} points but {labels.shape[0]} labels")
        if not np.all(np.isfinite(points)):
            raise ReductionError(f"{self.method.value} produced non-finite coordinates")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.points.shape[0]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.points[:, 0], "y": self.points[:, 1], "label": self.labels})


def neighbor_agreement(points: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of points whose nearest other point carries the same label."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    if points.shape[0] < 2:
        raise ReductionError("neighbor agreement needs at least 2 points")
    d = squared_distances(points)
    np.fill_diagonal(d, np.inf)
    nearest = np.argmin(d, axis=1)
    return float(np.mean(labels[nearest] == labels))
