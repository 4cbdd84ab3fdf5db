# The MIT License (MIT)
# Copyright © 2024 fraudbench contributors

# Permission is hereby granted, free of charge, to any person obtaining a copy of this software and associated
# documentation files (the “Software”), to deal in the Software without restriction, including without limitation
# the rights to use, copy, modify, merge, publish, distribute, sublicense, and/or sell copies of the Software,
# and to permit persons to whom the Software is furnished to do so, subject to the following conditions:

# The above copyright notice and this permission notice shall be included in all copies or substantial portions of
# the Software.

# THE SOFTWARE IS PROVIDED “AS IS”, WITHOUT WARRANTY OF ANY KIND, EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO
# THE WARRANTIES OF MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL
# THE AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION
# OF CONTRACT, TORT OR OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER
# DEALINGS IN THE SOFTWARE.

import logging
import typing
from abc import ABC, abstractmethod
from collections import OrderedDict
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict

from fraudbench.base import codec
from fraudbench.data.dataset import LabeledDataset
from fraudbench.data.preprocess import Standardizer
from fraudbench.errors import ModelFormatError, ShapeError, TrainingError

logger = logging.getLogger(__name__)

# Tensors holding the input standardization of a model trained on scaled features.
SCALER_TENSORS = ("input.mean", "input.scale")


class ModelSettings(BaseModel):
    """Base for the per-model hyperparameter sections of an experiment config."""

    model_config = ConfigDict(frozen=True, extra="forbid")


class Classifier(ABC):
    """
    Base class for every benchmarked model. Subclasses set `name`, `magic`
    and `Settings`, and implement fitting, batch scoring and the tensor
    state used by the binary codec.

    score() is a monotone fraud score; predict() thresholds it at
    `threshold`, which is 0.5 for probabilistic models and 0 for margins.

    A model fitted on standardized features carries its `input_scaler`, so
    scoring and saved files both take raw features.
    """

    name: str = "classifier"
    magic: bytes = b"FBXX"
    threshold: float = 0.5
    Settings: typing.Type[ModelSettings] = ModelSettings

    def __init__(self, settings: typing.Optional[ModelSettings] = None):
        self.settings = settings if settings is not None else self.Settings()
        if not isinstance(self.settings, self.Settings):
            raise TypeError(f"{self.name} expects {self.Settings.__name__}, got {type(self.settings).__name__}")
        self.columns: typing.Optional[typing.Tuple[str, ...]] = None
        self.loss_curve: typing.List[float] = []
        self.input_scaler: typing.Optional[Standardizer] = None

    @property
    def is_fitted(self) -> bool:
        return self.columns is not None

    @property
    def n_features(self) -> int:
        self._require_fitted()
        return len(self.columns)

    def hyperparameters(self) -> typing.Dict[str, typing.Any]:
        return self.settings.model_dump(mode="json")

    def fit(self, train: LabeledDataset, seed: int = 0) -> "Classifier":
        if train.n_rows == 0:
            raise TrainingError(f"{self.name}: empty training set")
        logger.debug(f"Fitting {self.name} on {train.n_rows} rows, seed {seed}")
        self._fit(train.features, train.labels, seed)
        self.columns = train.columns
        self.input_scaler = None
        return self

    def attach_scaler(self, scaler: Standardizer) -> "Classifier":
        """Score raw features by standardizing them with the scaler the training rows went through."""
        self._require_fitted()
        if scaler.columns != self.columns:
            raise ShapeError(f"{self.name}: scaler columns {scaler.columns} differ from model columns {self.columns}")
        self.input_scaler = scaler
        return self

    @abstractmethod
    def _fit(self, features: np.ndarray, labels: np.ndarray, seed: int):
        ...

    @abstractmethod
    def _score(self, features: np.ndarray) -> np.ndarray:
        ...

    def _require_fitted(self):
        if self.columns is None:
            raise TrainingError(f"{self.name} has not been fitted")

    def _check_features(self, features: np.ndarray) -> np.ndarray:
        self._require_fitted()
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features[None, :]
        if features.ndim != 2 or features.shape[1] != len(self.columns):
            raise ShapeError(
                f"{self.name} was fitted on {len(self.columns)} features, got input of shape {features.shape}"
            )
        return features

    def score_batch(self, features: np.ndarray) -> np.ndarray:
        features = self._check_features(features)
        if self.input_scaler is not None:
            features = self.input_scaler.transform_features(features)
        return self._score(features)

    def score_dataset(self, ds: LabeledDataset) -> np.ndarray:
        self._require_fitted()
        if ds.columns != self.columns:
            raise ShapeError(f"{self.name} was fitted on columns {self.columns}, dataset has {ds.columns}")
        return self.score_batch(ds.features)

    def score(self, row) -> float:
        return float(self.score_batch(np.asarray(row, dtype=np.float64).reshape(1, -1))[0])

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        return (self.score_batch(features) >= self.threshold).astype(np.int64)

    def predict(self, row) -> int:
        return int(self.score(row) >= self.threshold)

    # --- persistence ------------------------------------------------------

    @abstractmethod
    def state_tensors(self) -> "typing.OrderedDict[str, np.ndarray]":
        ...

    @abstractmethod
    def load_state(self, tensors: typing.Mapping[str, np.ndarray]):
        ...

    def header(self) -> typing.Dict[str, typing.Any]:
        """JSON header stored in front of the tensors."""
        return {
            "settings": self.hyperparameters(),
            "columns": list(self.columns),
            "standardized": self.input_scaler is not None,
        }

    def save(self, path: typing.Union[str, Path]) -> Path:
        self._require_fitted()
        tensors = OrderedDict(self.state_tensors())
        if self.input_scaler is not None:
            tensors[SCALER_TENSORS[0]] = self.input_scaler.mean
            tensors[SCALER_TENSORS[1]] = self.input_scaler.scale
        return codec.write_model(path, self.magic, self.header(), tensors)

    @classmethod
    def load(cls, path: typing.Union[str, Path]) -> "Classifier":
        header, tensors = codec.read_model(path, cls.magic)
        try:
            settings = cls.Settings(**header["settings"])
            columns = tuple(header["columns"])
            standardized = bool(header.get("standardized", False))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"{path}: invalid {cls.name} header: {exc}") from None
        model = cls(settings)
        model.columns = columns
        if standardized:
            model.input_scaler = _read_scaler(tensors, columns, path)
        model.load_state(tensors)
        return model


def _read_scaler(tensors: "typing.OrderedDict[str, np.ndarray]", columns, path) -> Standardizer:
    """Pop the scaler tensors out of `tensors`; the rest are the model's own."""
    codec.check_shapes(
        {name: tensors[name] for name in SCALER_TENSORS if name in tensors},
        {name: (len(columns),) for name in SCALER_TENSORS},
        str(path),
    )
    mean, scale = (tensors.pop(name) for name in SCALER_TENSORS)
    if not np.all(scale > 0.0):
        raise ModelFormatError(f"{path}: input scale must be positive")
    return Standardizer(tuple(columns), mean, scale)
