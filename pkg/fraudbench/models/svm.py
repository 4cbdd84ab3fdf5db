from collections import OrderedDict

import numpy as np
from pydantic import Field

from fraudbench.base import codec
from fraudbench.base.classifier import Classifier, ModelSettings
from fraudbench.base.training import TrainConfig, train_minibatch
from fraudbench.numerics.rng import make_rng


class SvmSettings(ModelSettings):
    epochs: int = Field(ge=1, default=100)
    batch_size: int = Field(ge=1, default=64)
    lr: float = Field(ge=0.0, default=1e-2)
    shuffle_each_epoch: bool = True
    l2: float = Field(ge=0.0, default=1e-3)


def hinge_loss_and_grads(params, features, labels, rng=None):
    """Mean hinge loss with labels mapped to +-1; sub-gradient at the hinge is 0."""
    y = np.where(labels == 1, 1.0, -1.0)
    margin = features @ params["weight"] + params["bias"][0]
    slack = 1.0 - y * margin
    active = slack > 0.0
    loss = float(np.mean(np.where(active, slack, 0.0)))
    g = np.where(active, -y, 0.0) / features.shape[0]
    return loss, {"weight": features.T @ g, "bias": np.array([g.sum()])}


class LinearSvm(Classifier):
    """
    Linear SVM trained by sub-gradient Adam on hinge + (l2/2)||w||^2.
    The score is the raw signed margin; no probability calibration.
    """

    name = "svm"
    magic = b"FBSV"
    threshold = 0.0
    Settings = SvmSettings

    def __init__(self, settings=None):
        super().__init__(settings)
        self.params = None

    def _fit(self, features, labels, seed):
        s = self.settings
        cfg = TrainConfig(
            epochs=s.epochs, batch_size=s.batch_size, lr=s.lr, seed=seed,
            shuffle_each_epoch=s.shuffle_each_epoch, l2=s.l2,
        )
        params = {"weight": np.zeros(features.shape[1]), "bias": np.zeros(1)}
        self.params, self.loss_curve = train_minibatch(
            params, hinge_loss_and_grads, features, labels, cfg,
            make_rng(seed), decay=["weight"], model=self.name,
        )

    def _score(self, features):
        return features @ self.params["weight"] + self.params["bias"][0]

    def state_tensors(self):
        return OrderedDict([("weight", self.params["weight"]), ("bias", self.params["bias"])])

    def load_state(self, tensors):
        codec.check_shapes(tensors, {"weight": (len(self.columns),), "bias": (1,)}, self.name)
        self.params = dict(tensors)
