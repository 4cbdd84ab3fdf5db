"""
Encoder-only transformer classifier for tabular rows, in numpy with
hand-written backpropagation.

Each scalar feature becomes one token: x_t * w_t + b_t + identity_t, where
the identity table plays the part of a positional encoding. Tokens pass
through post-LN encoder layers

    Y = LayerNorm(X + Dropout(MHA(X)))
    Z = LayerNorm(Y + Dropout(FFN(Y)))

and are mean-pooled into a linear two-way softmax head.

All activations carry a leading batch axis: (B, T, D).
"""

import logging
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from fraudbench.base import codec
from fraudbench.base.classifier import SCALER_TENSORS, Classifier, ModelSettings
from fraudbench.base.training import TrainConfig, require_two_classes, train_minibatch
from fraudbench.data.dataset import LabeledDataset
from fraudbench.errors import ModelFormatError, ShapeError
from fraudbench.numerics.kernels import (
    dropout_mask,
    layer_norm_backward,
    layer_norm_forward,
    linear_backward,
    relu,
    relu_backward,
    softmax_cross_entropy,
    softmax_rows,
    softmax_rows_backward,
)
from fraudbench.numerics.rng import Rng, make_rng

logger = logging.getLogger(__name__)

MAGIC = b"FBTF"
IDENTITY_INIT_STD = 0.02
INFERENCE_CHUNK = 256

Params = Dict[str, np.ndarray]


class TransformerHyper(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    d_model: int = Field(ge=1, default=32)
    n_heads: int = Field(ge=1, default=4)
    n_layers: int = Field(ge=1, default=2)
    d_ff: int = Field(ge=1, default=64)
    dropout_rate: float = Field(ge=0.0, lt=1.0, default=0.1)
    n_classes: Literal[2] = 2
    max_tokens: int = Field(ge=1)

    @model_validator(mode="after")
    def check_heads(self) -> "TransformerHyper":
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        return self

    @property
    def d_k(self) -> int:
        return self.d_model // self.n_heads


# --- parameters ---------------------------------------------------------------


def param_shapes(hyper: TransformerHyper) -> "OrderedDict[str, Tuple[int, ...]]":
    """Every tensor of the model in its declared (serialization) order."""
    t, d, f = hyper.max_tokens, hyper.d_model, hyper.d_ff
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
    shapes["embed.weight"] = (t, d)
    shapes["embed.bias"] = (t, d)
    shapes["embed.identity"] = (t, d)
    for layer in range(hyper.n_layers):
        p = f"layers.{layer}"
        for w in ("w_q", "w_k", "w_v", "w_o"):
            shapes[f"{p}.{w}"] = (d, d)
        shapes[f"{p}.ffn.w1"] = (d, f)
        shapes[f"{p}.ffn.b1"] = (f,)
        shapes[f"{p}.ffn.w2"] = (f, d)
        shapes[f"{p}.ffn.b2"] = (d,)
        shapes[f"{p}.ln1.gain"] = (d,)
        shapes[f"{p}.ln1.bias"] = (d,)
        shapes[f"{p}.ln2.gain"] = (d,)
        shapes[f"{p}.ln2.bias"] = (d,)
    shapes["head.weight"] = (d, hyper.n_classes)
    shapes["head.bias"] = (hyper.n_classes,)
    return shapes


def weight_names(hyper: TransformerHyper) -> List[str]:
    """Tensors that receive L2 decay: every weight matrix, no biases or norms."""
    names = ["embed.weight", "head.weight"]
    for layer in range(hyper.n_layers):
        p = f"layers.{layer}"
        names += [f"{p}.w_q", f"{p}.w_k", f"{p}.w_v", f"{p}.w_o", f"{p}.ffn.w1", f"{p}.ffn.w2"]
    return names


def _xavier(rng: Rng, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(hyper: TransformerHyper, rng: Rng) -> Params:
    params: Params = OrderedDict()
    for name, shape in param_shapes(hyper).items():
        if name == "embed.weight":
            params[name] = _xavier(rng, 1, hyper.d_model, shape)
        elif name == "embed.identity":
            params[name] = rng.normal(0.0, IDENTITY_INIT_STD, size=shape)
        elif name.endswith(".gain"):
            params[name] = np.ones(shape)
        elif len(shape) == 2 and name != "embed.bias":
            params[name] = _xavier(rng, shape[0], shape[1], shape)
        else:
            params[name] = np.zeros(shape)
    return params


# --- forward ------------------------------------------------------------------


def _as_batch(rows: np.ndarray, hyper: TransformerHyper) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    if rows.ndim != 2 or rows.shape[1] != hyper.max_tokens:
        raise ShapeError(f"expected rows of {hyper.max_tokens} features, got shape {rows.shape}")
    return rows


def tokenize(rows: np.ndarray, params: Params) -> np.ndarray:
    """(B, T) feature rows -> (B, T, D) tokens; a 1-D row gives a (T, D) matrix."""
    rows = np.asarray(rows, dtype=np.float64)
    weight = params["embed.weight"]
    single = rows.ndim == 1
    batch = rows[None, :] if single else rows
    if batch.shape[-1] != weight.shape[0]:
        raise ShapeError(f"row has {batch.shape[-1]} features, model expects {weight.shape[0]}")
    tokens = batch[:, :, None] * weight + params["embed.bias"] + params["embed.identity"]
    return tokens[0] if single else tokens


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, t, dk = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dk)


def _attention_forward(x: np.ndarray, params: Params, prefix: str, n_heads: int):
    w_q, w_k, w_v, w_o = (params[f"{prefix}.{w}"] for w in ("w_q", "w_k", "w_v", "w_o"))
    if x.shape[-1] != w_q.shape[0]:
        raise ShapeError(f"{prefix}: tokens have width {x.shape[-1]}, W_Q expects {w_q.shape[0]}")
    qh = _split_heads(x @ w_q, n_heads)
    kh = _split_heads(x @ w_k, n_heads)
    vh = _split_heads(x @ w_v, n_heads)
    scale = 1.0 / np.sqrt(qh.shape[-1])
    attn = softmax_rows(qh @ kh.swapaxes(-1, -2) * scale)
    concat = _merge_heads(attn @ vh)
    cache = {"x": x, "qh": qh, "kh": kh, "vh": vh, "attn": attn, "concat": concat, "scale": scale}
    return concat @ w_o, cache


def _attention_backward(dout: np.ndarray, cache: dict, params: Params, prefix: str, grads: Params):
    w_q, w_k, w_v, w_o = (params[f"{prefix}.{w}"] for w in ("w_q", "w_k", "w_v", "w_o"))
    d = w_o.shape[0]
    n_heads = cache["qh"].shape[1]
    x2 = cache["x"].reshape(-1, d)

    grads[f"{prefix}.w_o"] = cache["concat"].reshape(-1, d).T @ dout.reshape(-1, d)
    dheads = _split_heads(dout @ w_o.T, n_heads)
    attn = cache["attn"]
    dattn = dheads @ cache["vh"].swapaxes(-1, -2)
    dvh = attn.swapaxes(-1, -2) @ dheads
    dscores = softmax_rows_backward(dattn, attn) * cache["scale"]
    dqh = dscores @ cache["kh"]
    dkh = dscores.swapaxes(-1, -2) @ cache["qh"]

    dq, dk, dv = _merge_heads(dqh), _merge_heads(dkh), _merge_heads(dvh)
    grads[f"{prefix}.w_q"] = x2.T @ dq.reshape(-1, d)
    grads[f"{prefix}.w_k"] = x2.T @ dk.reshape(-1, d)
    grads[f"{prefix}.w_v"] = x2.T @ dv.reshape(-1, d)
    return dq @ w_q.T + dk @ w_k.T + dv @ w_v.T


def multi_head_attention(x: np.ndarray, params: Params, layer: int, n_heads: int) -> np.ndarray:
    """
    Scaled dot-product attention over the tokens of each row, heads
    concatenated and projected by W_O. Accepts (T, D) or (B, T, D).
    """
    single = x.ndim == 2
    out, _ = _attention_forward(x[None] if single else x, params, f"layers.{layer}", n_heads)
    return out[0] if single else out


def attention_weights(x: np.ndarray, params: Params, layer: int, n_heads: int) -> np.ndarray:
    """Attention matrices (B, H, T, T); every row sums to 1."""
    x = x[None] if x.ndim == 2 else x
    _, cache = _attention_forward(x, params, f"layers.{layer}", n_heads)
    return cache["attn"]


def _encoder_forward(x, params, layer, hyper, training, rng):
    p = f"layers.{layer}"
    attn_out, attn_cache = _attention_forward(x, params, p, hyper.n_heads)
    mask1 = dropout_mask(attn_out.shape, hyper.dropout_rate, training, rng)
    if mask1 is not None:
        attn_out = attn_out * mask1
    y, ln1_cache = layer_norm_forward(x + attn_out, params[f"{p}.ln1.gain"], params[f"{p}.ln1.bias"])

    h_pre = y @ params[f"{p}.ffn.w1"] + params[f"{p}.ffn.b1"]
    h = relu(h_pre)
    ffn_out = h @ params[f"{p}.ffn.w2"] + params[f"{p}.ffn.b2"]
    mask2 = dropout_mask(ffn_out.shape, hyper.dropout_rate, training, rng)
    if mask2 is not None:
        ffn_out = ffn_out * mask2
    z, ln2_cache = layer_norm_forward(y + ffn_out, params[f"{p}.ln2.gain"], params[f"{p}.ln2.bias"])
    cache = {
        "attn": attn_cache,
        "mask1": mask1,
        "ln1": ln1_cache,
        "y": y,
        "h_pre": h_pre,
        "h": h,
        "mask2": mask2,
        "ln2": ln2_cache,
    }
    return z, cache


def _encoder_backward(dz, cache, params, layer, grads):
    p = f"layers.{layer}"
    dr2, grads[f"{p}.ln2.gain"], grads[f"{p}.ln2.bias"] = layer_norm_backward(dz, cache["ln2"])
    dffn = dr2 if cache["mask2"] is None else dr2 * cache["mask2"]
    dh, grads[f"{p}.ffn.w2"], grads[f"{p}.ffn.b2"] = linear_backward(dffn, cache["h"], params[f"{p}.ffn.w2"])
    dh_pre = relu_backward(dh, cache["h_pre"])
    dy_ffn, grads[f"{p}.ffn.w1"], grads[f"{p}.ffn.b1"] = linear_backward(
        dh_pre, cache["y"], params[f"{p}.ffn.w1"]
    )
    dy = dr2 + dy_ffn
    dr1, grads[f"{p}.ln1.gain"], grads[f"{p}.ln1.bias"] = layer_norm_backward(dy, cache["ln1"])
    dattn = dr1 if cache["mask1"] is None else dr1 * cache["mask1"]
    return dr1 + _attention_backward(dattn, cache["attn"], params, p, grads)


def encoder_layer(
    x: np.ndarray,
    params: Params,
    layer: int,
    hyper: TransformerHyper,
    training: bool = False,
    rng: Optional[Rng] = None,
) -> np.ndarray:
    single = x.ndim == 2
    z, _ = _encoder_forward(x[None] if single else x, params, layer, hyper, training, rng)
    return z[0] if single else z


def _forward(rows, params, hyper, training, rng):
    tokens = tokenize(rows, params)
    caches = []
    x = tokens
    for layer in range(hyper.n_layers):
        x, cache = _encoder_forward(x, params, layer, hyper, training, rng)
        caches.append(cache)
    pooled = x.mean(axis=1)
    logits = pooled @ params["head.weight"] + params["head.bias"]
    return logits, {"rows": rows, "layers": caches, "pooled": pooled, "n_tokens": x.shape[1]}


def forward_batch(
    rows: np.ndarray,
    params: Params,
    hyper: TransformerHyper,
    training: bool = False,
    rng: Optional[Rng] = None,
) -> np.ndarray:
    """Class probabilities (B, 2) for a batch of rows."""
    logits, _ = _forward(_as_batch(rows, hyper), params, hyper, training, rng)
    return softmax_rows(logits)


def forward(
    row: np.ndarray,
    params: Params,
    hyper: TransformerHyper,
    training: bool = False,
    rng: Optional[Rng] = None,
) -> np.ndarray:
    """Probabilities [p(legit), p(fraud)] for one row."""
    return forward_batch(np.asarray(row, dtype=np.float64).reshape(1, -1), params, hyper, training, rng)[0]


def loss_and_grads(
    params: Params,
    rows: np.ndarray,
    labels: np.ndarray,
    hyper: TransformerHyper,
    training: bool = True,
    rng: Optional[Rng] = None,
) -> Tuple[float, Params]:
    """Mean cross-entropy over the batch and its gradient for every tensor."""
    rows = _as_batch(rows, hyper)
    logits, cache = _forward(rows, params, hyper, training, rng)
    loss, _, dlogits = softmax_cross_entropy(logits, labels)

    grads: Params = {}
    grads["head.weight"] = cache["pooled"].T @ dlogits
    grads["head.bias"] = dlogits.sum(axis=0)
    dpooled = dlogits @ params["head.weight"].T
    dx = np.repeat(dpooled[:, None, :] / cache["n_tokens"], cache["n_tokens"], axis=1)
    for layer in reversed(range(hyper.n_layers)):
        dx = _encoder_backward(dx, cache["layers"][layer], params, layer, grads)

    grads["embed.weight"] = np.sum(dx * rows[:, :, None], axis=0)
    grads["embed.bias"] = dx.sum(axis=0)
    grads["embed.identity"] = dx.sum(axis=0)
    return loss, {name: grads[name] for name in params}


# --- training and inference -------------------------------------------------------


def train(
    ds: Union[LabeledDataset, Tuple[np.ndarray, np.ndarray]],
    hyper: TransformerHyper,
    cfg: TrainConfig = TrainConfig(),
) -> Tuple[Params, List[float]]:
    """
    Mini-batch Adam on the mean cross-entropy.

    Returns:
        (trained parameters, per-epoch mean training loss).
    """
    features, labels = (ds.features, ds.labels) if isinstance(ds, LabeledDataset) else ds
    features = _as_batch(features, hyper)
    require_two_classes(labels, "transformer")
    rng = make_rng(cfg.seed)
    params = init_params(hyper, rng)

    def objective(p, xb, yb, batch_rng):
        return loss_and_grads(p, xb, yb, hyper, training=True, rng=batch_rng)

    return train_minibatch(
        params, objective, features, labels, cfg, rng, decay=weight_names(hyper), model="transformer"
    )


def predict_proba(
    ds: Union[LabeledDataset, np.ndarray], params: Params, hyper: TransformerHyper
) -> np.ndarray:
    """Fraud probability per row, inference mode, input order preserved."""
    features = ds.features if isinstance(ds, LabeledDataset) else ds
    features = _as_batch(features, hyper)
    out = np.empty(features.shape[0])
    for start in range(0, features.shape[0], INFERENCE_CHUNK):
        chunk = features[start : start + INFERENCE_CHUNK]
        out[start : start + chunk.shape[0]] = forward_batch(chunk, params, hyper)[:, 1]
    return out


# --- persistence --------------------------------------------------------------------


def save_model(
    path: Union[str, Path],
    hyper: TransformerHyper,
    params: Params,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    codec.check_shapes(params, param_shapes(hyper), "transformer")
    header = {"hyper": hyper.model_dump(mode="json"), **(extra or {})}
    ordered = OrderedDict((name, params[name]) for name in param_shapes(hyper))
    return codec.write_model(path, MAGIC, header, ordered)


def load_model(
    path: Union[str, Path], expected: Optional[TransformerHyper] = None
) -> Tuple[TransformerHyper, Params, Dict[str, Any]]:
    """
    Read a transformer file. With `expected`, the tensors are also checked
    against that architecture and the first mismatching tensor is named.
    Input scaler tensors written by a standardized classifier are skipped.
    """
    header, tensors = codec.read_model(path, MAGIC)
    for name in SCALER_TENSORS:
        tensors.pop(name, None)
    try:
        hyper = TransformerHyper(**header["hyper"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: invalid transformer hyperparameters: {exc}") from None
    target = expected if expected is not None else hyper
    codec.check_shapes(tensors, param_shapes(target), str(path))
    return hyper, dict(tensors), header


class TransformerSettings(ModelSettings):
    d_model: int = Field(ge=1, default=32)
    n_heads: int = Field(ge=1, default=4)
    n_layers: int = Field(ge=1, default=2)
    d_ff: int = Field(ge=1, default=64)
    dropout_rate: float = Field(ge=0.0, lt=1.0, default=0.1)
    epochs: int = Field(ge=1, default=30)
    batch_size: int = Field(ge=1, default=32)
    lr: float = Field(ge=0.0, default=1e-3)
    shuffle_each_epoch: bool = True
    l2: float = Field(ge=0.0, default=0.0)

    @model_validator(mode="after")
    def check_heads(self) -> "TransformerSettings":
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        return self

    def hyper(self, max_tokens: int) -> TransformerHyper:
        return TransformerHyper(
            d_model=self.d_model,
            n_heads=self.n_heads,
            n_layers=self.n_layers,
            d_ff=self.d_ff,
            dropout_rate=self.dropout_rate,
            max_tokens=max_tokens,
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            seed=seed,
            shuffle_each_epoch=self.shuffle_each_epoch,
            l2=self.l2,
        )


class TransformerClassifier(Classifier):
    name = "transformer"
    magic = MAGIC
    threshold = 0.5
    Settings = TransformerSettings

    def __init__(self, settings: Optional[TransformerSettings] = None):
        super().__init__(settings)
        self.hyper: Optional[TransformerHyper] = None
        self.params: Optional[Params] = None

    def _fit(self, features, labels, seed):
        self.hyper = self.settings.hyper(features.shape[1])
        self.params, self.loss_curve = train((features, labels), self.hyper, self.settings.train_config(seed))

    def _score(self, features):
        return predict_proba(features, self.params, self.hyper)

    def state_tensors(self):
        return OrderedDict((name, self.params[name]) for name in param_shapes(self.hyper))

    def load_state(self, tensors):
        self.hyper = self.settings.hyper(len(self.columns))
        codec.check_shapes(tensors, param_shapes(self.hyper), self.name)
        self.params = dict(tensors)

    def header(self):
        return {"hyper": self.hyper.model_dump(mode="json"), **super().header()}
