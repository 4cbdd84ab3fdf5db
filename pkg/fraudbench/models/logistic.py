from collections import OrderedDict
from typing import Optional

import numpy as np
from pydantic import Field

from fraudbench.base import codec
from fraudbench.base.classifier import Classifier, ModelSettings
from fraudbench.base.training import TrainConfig, train_minibatch
from fraudbench.numerics.kernels import sigmoid
from fraudbench.numerics.rng import make_rng


class LogisticSettings(ModelSettings):
    """
    Defaults fit the mean loss with full-batch steps until the gradient norm
    drops below tol, so the result depends on the data, not its row count.
    """

    epochs: int = Field(ge=1, default=1000)
    batch_size: Optional[int] = Field(ge=1, default=None)
    lr: float = Field(ge=0.0, default=5e-2)
    tol: float = Field(ge=0.0, default=1e-6)
    shuffle_each_epoch: bool = True
    l2: float = Field(ge=0.0, default=0.0)


def logistic_loss_and_grads(params, features, labels, rng=None):
    """Mean binary cross-entropy of sigmoid(x.w + b), written with logaddexp for stability."""
    z = features @ params["weight"] + params["bias"][0]
    y = labels.astype(np.float64)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    g = (sigmoid(z) - y) / features.shape[0]
    return loss, {"weight": features.T @ g, "bias": np.array([g.sum()])}


class LogisticRegression(Classifier):
    name = "logistic"
    magic = b"FBLR"
    threshold = 0.5
    Settings = LogisticSettings

    def __init__(self, settings=None):
        super().__init__(settings)
        self.params = None

    def init_params(self, n_features: int):
        self.params = {"weight": np.zeros(n_features), "bias": np.zeros(1)}
        return self.params

    def _fit(self, features, labels, seed):
        s = self.settings
        cfg = TrainConfig(
            epochs=s.epochs, batch_size=s.batch_size, lr=s.lr, seed=seed,
            shuffle_each_epoch=s.shuffle_each_epoch, l2=s.l2, tol=s.tol,
        )
        self.init_params(features.shape[1])
        self.params, self.loss_curve = train_minibatch(
            self.params, logistic_loss_and_grads, features, labels, cfg,
            make_rng(seed), decay=["weight"], model=self.name,
        )

    def _score(self, features):
        return sigmoid(features @ self.params["weight"] + self.params["bias"][0])

    def state_tensors(self):
        return OrderedDict([("weight", self.params["weight"]), ("bias", self.params["bias"])])

    def load_state(self, tensors):
        codec.check_shapes(tensors, {"weight": (len(self.columns),), "bias": (1,)}, self.name)
        self.params = dict(tensors)
