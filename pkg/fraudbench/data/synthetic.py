"""
Seeded synthetic fixtures with a known class structure.

Both generators return balanced data (n_per_class rows of each class) with
feature columns x0..x{n-1}. They are pure functions of their `SyntheticSpec`.
"""

import enum
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from fraudbench.data.dataset import LabeledDataset
from fraudbench.numerics.rng import make_rng

logger = logging.getLogger(__name__)

XOR_CENTER = 1.5
XOR_JITTER = 0.5


class SyntheticKind(str, enum.Enum):
    GAUSSIAN_BLOBS = "blobs"
    XOR_QUADRANTS = "xor"


class SyntheticSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_per_class: int = Field(ge=1)
    kind: SyntheticKind = SyntheticKind.GAUSSIAN_BLOBS
    n_features: int = Field(ge=2, default=2)
    seed: int = 0
    mu: float = 3.0


def feature_names(n_features: int):
    return tuple(f"x{i}" for i in range(n_features))


def _gaussian_blobs(spec: SyntheticSpec, rng) -> LabeledDataset:
    n, d = spec.n_per_class, spec.n_features
    legit = rng.normal(-spec.mu, 1.0, size=(n, d))
    fraud = rng.normal(spec.mu, 1.0, size=(n, d))
    features = np.vstack([legit, fraud])
    labels = np.concatenate([np.zeros(n, dtype=np.int64), np.ones(n, dtype=np.int64)])
    order = rng.permutation(2 * n)
    return LabeledDataset(features[order], feature_names(d), labels[order])


def _xor_quadrants(spec: SyntheticSpec, rng) -> LabeledDataset:
    n, d = spec.n_per_class, spec.n_features
    # class 1 owns the quadrants where sign(x0) * sign(x1) < 0
    quadrant_signs = {
        0: np.array([[1.0, 1.0], [-1.0, -1.0]]),
        1: np.array([[1.0, -1.0], [-1.0, 1.0]]),
    }
    blocks = []
    labels = []
    for cls in (0, 1):
        # alternate the two quadrants so each gets n // 2 (or n // 2 + 1) rows
        signs = quadrant_signs[cls][np.arange(n) % 2]
        centers = XOR_CENTER * signs
        jitter = rng.normal(0.0, XOR_JITTER, size=(n, 2))
        xy = centers + jitter
        noise = rng.normal(0.0, 1.0, size=(n, d - 2))
        blocks.append(np.hstack([xy, noise]))
        labels.append(np.full(n, cls, dtype=np.int64))
    features = np.vstack(blocks)
    labels = np.concatenate(labels)
    order = rng.permutation(2 * n)
    return LabeledDataset(features[order], feature_names(d), labels[order])


def generate_synthetic(spec: SyntheticSpec) -> LabeledDataset:
    """
    Args:
        spec: row count per class, kind, feature count, seed and blob offset mu.

    Returns:
        A dataset with 2 * n_per_class rows, shuffled with `spec.seed`.
    """
    rng = make_rng(spec.seed)
    if spec.kind == SyntheticKind.GAUSSIAN_BLOBS:
        ds = _gaussian_blobs(spec, rng)
    else:
        ds = _xor_quadrants(spec, rng)
    logger.debug(
        f"Generated {spec.kind.value} fixture: {ds.n_rows} rows, {ds.n_cols} features, seed {spec.seed}"
    )
    return ds
