from .rng import Rng, make_rng, derive_seed, split_rng
from .kernels import (
    matmul,
    softmax_rows,
    layer_norm,
    relu,
    linear,
    sigmoid,
    softmax_cross_entropy,
    squared_distances,
)
from .optim import AdamState, adam_step
from .gradcheck import GradCheckReport, grad_check

__all__ = [
    "Rng",
    "make_rng",
    "derive_seed",
    "split_rng",
    "matmul",
    "softmax_rows",
    "layer_norm",
    "relu",
    "linear",
    "sigmoid",
    "softmax_cross_entropy",
    "squared_distances",
    "AdamState",
    "adam_step",
    "GradCheckReport",
    "grad_check",
]
