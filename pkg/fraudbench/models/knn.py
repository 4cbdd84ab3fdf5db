from collections import OrderedDict

import numpy as np
from pydantic import Field

from fraudbench.base import codec
from fraudbench.base.classifier import Classifier, ModelSettings
from fraudbench.errors import ModelFormatError, TrainingError
from fraudbench.numerics.kernels import squared_distances

QUERY_CHUNK = 256


class KnnSettings(ModelSettings):
    k: int = Field(ge=1, default=5)


class KNearestNeighbors(Classifier):
    """
    Brute-force Euclidean KNN. The score is the fraud fraction among the k
    nearest training rows; equal distances go to the lower training index.
    """

    name = "knn"
    magic = b"FBKN"
    threshold = 0.5
    Settings = KnnSettings

    def __init__(self, settings=None):
        super().__init__(settings)
        self.train_features = None
        self.train_labels = None

    def _fit(self, features, labels, seed):
        if self.settings.k > features.shape[0]:
            raise TrainingError(f"knn: k={self.settings.k} exceeds {features.shape[0]} training rows")
        self.train_features = np.array(features, dtype=np.float64)
        self.train_labels = np.asarray(labels, dtype=np.float64)

    def _score(self, features):
        k = self.settings.k
        out = np.empty(features.shape[0])
        for start in range(0, features.shape[0], QUERY_CHUNK):
            d = squared_distances(features[start : start + QUERY_CHUNK], self.train_features)
            nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
            out[start : start + d.shape[0]] = self.train_labels[nearest].mean(axis=1)
        return out

    def state_tensors(self):
        return OrderedDict(
            [("train.features", self.train_features), ("train.labels", self.train_labels)]
        )

    def load_state(self, tensors):
        if "train.labels" not in tensors:
            raise ModelFormatError(f"{self.name}: missing tensor 'train.labels'")
        n = tensors["train.labels"].shape[0]
        codec.check_shapes(
            tensors, {"train.features": (n, len(self.columns)), "train.labels": (n,)}, self.name
        )
        if self.settings.k > n:
            raise ModelFormatError(f"{self.name}: k={self.settings.k} exceeds {n} stored rows")
        self.train_features = tensors["train.features"]
        self.train_labels = tensors["train.labels"]
