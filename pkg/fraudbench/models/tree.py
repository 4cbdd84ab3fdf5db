"""CART decision tree with Gini impurity and exhaustive midpoint splits."""

from collections import OrderedDict
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from pydantic import Field

from fraudbench.base import codec
from fraudbench.base.classifier import Classifier, ModelSettings
from fraudbench.errors import ModelFormatError

TIE_TOL = 1e-12
LEAF = -1


class TreeSettings(ModelSettings):
    max_depth: int = Field(ge=0, default=8)
    min_samples_split: int = Field(ge=2, default=2)


@dataclass(frozen=True)
class TreeNode:
    """A leaf when feature == -1; otherwise rows with x[feature] <= threshold go left."""

    feature: int
    threshold: float
    left: int
    right: int
    fraud_prob: float

    @property
    def is_leaf(self) -> bool:
        return self.feature == LEAF

    @property
    def proba(self) -> Tuple[float, float]:
        return (1.0 - self.fraud_prob, self.fraud_prob)


def gini(labels: np.ndarray) -> float:
    if labels.size == 0:
        return 0.0
    p = float(np.mean(labels))
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _weighted_child_gini(sorted_labels: np.ndarray, cut: np.ndarray) -> np.ndarray:
    """Size-weighted Gini of the two children for each cut position (left = [:cut+1])."""
    n = sorted_labels.size
    n_left = cut + 1.0
    n_right = n - n_left
    pos_left = np.cumsum(sorted_labels)[cut]
    pos_right = sorted_labels.sum() - pos_left
    p_left = pos_left / n_left
    p_right = pos_right / n_right
    g_left = 1.0 - p_left ** 2 - (1.0 - p_left) ** 2
    g_right = 1.0 - p_right ** 2 - (1.0 - p_right) ** 2
    return (n_left * g_left + n_right * g_right) / n


def best_split(features: np.ndarray, labels: np.ndarray) -> Optional[Tuple[int, float, float]]:
    """
    Exhaustive scan over features x midpoints between consecutive distinct
    values. Ties go to the lower feature index, then the lower threshold.

    Returns:
        (feature, threshold, weighted child Gini) or None if no feature varies.
    """
    best = None
    best_score = np.inf
    labels = labels.astype(np.float64)
    for f in range(features.shape[1]):
        order = np.argsort(features[:, f], kind="stable")
        values = features[order, f]
        cut = np.flatnonzero(values[:-1] != values[1:])
        if cut.size == 0:
            continue
        scores = _weighted_child_gini(labels[order], cut)
        i = int(np.flatnonzero(scores <= scores.min() + TIE_TOL)[0])
        if scores[i] < best_score - TIE_TOL:
            lo, hi = values[cut[i]], values[cut[i] + 1]
            threshold = 0.5 * (lo + hi)
            if not threshold < hi:
                threshold = lo
            best, best_score = (f, float(threshold), float(scores[i])), scores[i]
    return best


class DecisionTree(Classifier):
    name = "tree"
    magic = b"FBDT"
    threshold = 0.5
    Settings = TreeSettings

    def __init__(self, settings=None):
        super().__init__(settings)
        self.nodes: List[TreeNode] = []

    def _fit(self, features, labels, seed):
        self.nodes = []
        self._grow(features, labels.astype(np.float64), 0)

    def _grow(self, features: np.ndarray, labels: np.ndarray, depth: int) -> int:
        node_id = len(self.nodes)
        fraud_prob = float(np.mean(labels))
        self.nodes.append(TreeNode(LEAF, 0.0, LEAF, LEAF, fraud_prob))
        s = self.settings
        if fraud_prob in (0.0, 1.0) or depth >= s.max_depth or labels.size < s.min_samples_split:
            return node_id
        split = best_split(features, labels)
        if split is None:
            return node_id
        feature, threshold, _ = split
        go_left = features[:, feature] <= threshold
        left = self._grow(features[go_left], labels[go_left], depth + 1)
        right = self._grow(features[~go_left], labels[~go_left], depth + 1)
        self.nodes[node_id] = TreeNode(feature, threshold, left, right, fraud_prob)
        return node_id

    @property
    def depth(self) -> int:
        def walk(i):
            node = self.nodes[i]
            return 0 if node.is_leaf else 1 + max(walk(node.left), walk(node.right))

        return walk(0) if self.nodes else 0

    def _score(self, features):
        feature = np.array([n.feature for n in self.nodes])
        threshold = np.array([n.threshold for n in self.nodes])
        left = np.array([n.left for n in self.nodes])
        right = np.array([n.right for n in self.nodes])
        current = np.zeros(features.shape[0], dtype=np.int64)
        active = feature[current] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            at = current[rows]
            goes_left = features[rows, feature[at]] <= threshold[at]
            current[rows] = np.where(goes_left, left[at], right[at])
            active = feature[current] != LEAF
        return np.array([self.nodes[i].fraud_prob for i in current])

    def state_tensors(self):
        return OrderedDict(
            [
                ("nodes.feature", np.array([n.feature for n in self.nodes], dtype=np.float64)),
                ("nodes.threshold", np.array([n.threshold for n in self.nodes])),
                ("nodes.left", np.array([n.left for n in self.nodes], dtype=np.float64)),
                ("nodes.right", np.array([n.right for n in self.nodes], dtype=np.float64)),
                ("nodes.fraud_prob", np.array([n.fraud_prob for n in self.nodes])),
            ]
        )

    def load_state(self, tensors):
        if "nodes.feature" not in tensors:
            raise ModelFormatError(f"{self.name}: missing tensor 'nodes.feature'")
        n = tensors["nodes.feature"].shape[0]
        names = ("nodes.feature", "nodes.threshold", "nodes.left", "nodes.right", "nodes.fraud_prob")
        codec.check_shapes(tensors, {name: (n,) for name in names}, self.name)
        nodes = []
        for i in range(n):
            feature = int(tensors["nodes.feature"][i])
            left, right = int(tensors["nodes.left"][i]), int(tensors["nodes.right"][i])
            if feature != LEAF and not (0 <= feature < len(self.columns) and 0 < left < n and 0 < right < n):
                raise ModelFormatError(f"{self.name}: node {i} references an invalid feature or child")
            nodes.append(TreeNode(feature, float(tensors["nodes.threshold"][i]), left, right,
                                  float(tensors["nodes.fraud_prob"][i])))
        self.nodes = nodes
