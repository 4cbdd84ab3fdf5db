"""
Dense float64 kernels with hand-derived backward passes.

Every *_forward returns (output, cache) and the matching *_backward takes
(upstream gradient, cache). Leading axes are treated as batch axes so the
same code serves single rows, (T, D) token matrices and (B, T, D) batches.
"""

from typing import Optional, Tuple

import numpy as np

from fraudbench.errors import ShapeError
from fraudbench.numerics.rng import Rng

LAYER_NORM_EPS = 1e-5


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return a @ b


def softmax_rows(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    shifted = m - np.max(m, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def softmax_rows_backward(dy: np.ndarray, y: np.ndarray) -> np.ndarray:
    return y * (dy - np.sum(dy * y, axis=-1, keepdims=True))


def layer_norm_forward(
    x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = LAYER_NORM_EPS
) -> Tuple[np.ndarray, tuple]:
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(
            f"layer_norm expects gain/bias of shape ({d},), got {gain.shape} and {bias.shape}"
        )
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    mean = np.mean(x, axis=-1, keepdims=True)
    centered = x - mean
    var = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    return xhat * gain + bias, (xhat, inv_std, gain)


def layer_norm_backward(dy: np.ndarray, cache: tuple) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    xhat, inv_std, gain = cache
    lead = tuple(range(dy.ndim - 1))
    dgain = np.sum(dy * xhat, axis=lead)
    dbias = np.sum(dy, axis=lead)
    dxhat = dy * gain
    dx = inv_std * (
        dxhat
        - np.mean(dxhat, axis=-1, keepdims=True)
        - xhat * np.mean(dxhat * xhat, axis=-1, keepdims=True)
    )
    return dx, dgain, dbias


def layer_norm(
    x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = LAYER_NORM_EPS
) -> np.ndarray:
    """(x - mean) / sqrt(var + eps) * gain + bias with population variance."""
    x = np.asarray(x, dtype=np.float64)
    gain = np.asarray(gain, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    if x.shape[-1:] != gain.shape:
        raise ShapeError(f"layer_norm length mismatch: x {x.shape}, gain {gain.shape}")
    out, _ = layer_norm_forward(x, gain, bias, eps)
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dy * (x > 0)


def linear(x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray] = None) -> np.ndarray:
    if x.shape[-1] != w.shape[0]:
        raise ShapeError(f"linear shape mismatch: input {x.shape}, weight {w.shape}")
    out = x @ w
    if b is not None:
        out = out + b
    return out


def linear_backward(
    dy: np.ndarray, x: np.ndarray, w: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dx, dw, db) for y = x @ w + b with any number of leading axes."""
    d_in, d_out = w.shape
    dw = x.reshape(-1, d_in).T @ dy.reshape(-1, d_out)
    db = dy.reshape(-1, d_out).sum(axis=0)
    dx = dy @ w.T
    return dx, dw, db


def dropout_mask(shape, rate: float, training: bool, rng: Optional[Rng]) -> Optional[np.ndarray]:
    """Inverted-dropout mask (already divided by the keep probability) or None when inactive."""
    if not training or rate <= 0.0:
        return None
    if rng is None:
        raise ValueError("dropout in training mode needs a generator")
    keep = 1.0 - rate
    return (rng.random(shape) < keep) / keep


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Mean cross-entropy of row-wise softmax.

    Returns (loss, probabilities, dloss/dlogits).
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))
    log_probs = shifted - log_z
    probs = np.exp(log_probs)
    loss = -float(np.mean(log_probs[np.arange(n), labels]))
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits /= n
    return loss, probs, dlogits


def squared_distances(a: np.ndarray, b: Optional[np.ndarray] = None, chunk: int = 256) -> np.ndarray:
    """
    Pairwise squared Euclidean distances by explicit differences.

    Slower than the Gram-matrix identity but exact for identical points and
    independent of BLAS threading, so results are bitwise reproducible.
    """
    a = np.asarray(a, dtype=np.float64)
    b = a if b is None else np.asarray(b, dtype=np.float64)
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    for start in range(0, a.shape[0], chunk):
        block = a[start : start + chunk]
        diff = block[:, None, :] - b[None, :, :]
        out[start : start + chunk] = np.sum(diff * diff, axis=-1)
    return out
