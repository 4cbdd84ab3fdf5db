from collections import OrderedDict

import numpy as np
from pydantic import Field

from fraudbench.base import codec
from fraudbench.base.classifier import Classifier, ModelSettings
from fraudbench.base.training import TrainConfig, train_minibatch
from fraudbench.numerics.kernels import linear, linear_backward, relu, relu_backward, softmax_cross_entropy, softmax_rows
from fraudbench.numerics.rng import make_rng

HIDDEN = (32, 16)


class MlpSettings(ModelSettings):
    epochs: int = Field(ge=1, default=100)
    batch_size: int = Field(ge=1, default=32)
    lr: float = Field(ge=0.0, default=1e-3)
    shuffle_each_epoch: bool = True
    l2: float = Field(ge=0.0, default=0.0)


def mlp_shapes(n_features: int):
    h1, h2 = HIDDEN
    return OrderedDict(
        [
            ("fc1.weight", (n_features, h1)),
            ("fc1.bias", (h1,)),
            ("fc2.weight", (h1, h2)),
            ("fc2.bias", (h2,)),
            ("out.weight", (h2, 2)),
            ("out.bias", (2,)),
        ]
    )


def init_mlp(n_features: int, rng) -> dict:
    """Xavier-uniform hidden layers; the output layer starts at zero so initial scores are 0.5."""
    params = OrderedDict()
    for name, shape in mlp_shapes(n_features).items():
        if name.startswith("out.") or name.endswith(".bias"):
            params[name] = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
    return params


def mlp_forward(params, features):
    a1 = linear(features, params["fc1.weight"], params["fc1.bias"])
    h1 = relu(a1)
    a2 = linear(h1, params["fc2.weight"], params["fc2.bias"])
    h2 = relu(a2)
    logits = linear(h2, params["out.weight"], params["out.bias"])
    return logits, (features, a1, h1, a2, h2)


def mlp_loss_and_grads(params, features, labels, rng=None):
    logits, (x, a1, h1, a2, h2) = mlp_forward(params, features)
    loss, _, dlogits = softmax_cross_entropy(logits, labels)
    grads = {}
    dh2, grads["out.weight"], grads["out.bias"] = linear_backward(dlogits, h2, params["out.weight"])
    dh1, grads["fc2.weight"], grads["fc2.bias"] = linear_backward(relu_backward(dh2, a2), h1, params["fc2.weight"])
    _, grads["fc1.weight"], grads["fc1.bias"] = linear_backward(relu_backward(dh1, a1), x, params["fc1.weight"])
    return loss, grads


class Mlp(Classifier):
    """Fixed input -> 32 -> 16 -> 2 ReLU network with a softmax head."""

    name = "mlp"
    magic = b"FBML"
    threshold = 0.5
    Settings = MlpSettings

    def __init__(self, settings=None):
        super().__init__(settings)
        self.params = None

    def _fit(self, features, labels, seed):
        s = self.settings
        cfg = TrainConfig(
            epochs=s.epochs, batch_size=s.batch_size, lr=s.lr, seed=seed,
            shuffle_each_epoch=s.shuffle_each_epoch, l2=s.l2,
        )
        rng = make_rng(seed)
        params = init_mlp(features.shape[1], rng)
        self.params, self.loss_curve = train_minibatch(
            params, mlp_loss_and_grads, features, labels, cfg, rng,
            decay=["fc1.weight", "fc2.weight", "out.weight"], model=self.name,
        )

    def _score(self, features):
        logits, _ = mlp_forward(self.params, features)
        return softmax_rows(logits)[:, 1]

    def state_tensors(self):
        return OrderedDict((name, self.params[name]) for name in mlp_shapes(len(self.columns)))

    def load_state(self, tensors):
        codec.check_shapes(tensors, mlp_shapes(len(self.columns)), self.name)
        self.params = dict(tensors)
