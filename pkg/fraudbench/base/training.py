import logging
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from fraudbench.errors import TrainingError
from fraudbench.numerics.optim import AdamState, adam_step
from fraudbench.numerics.rng import Rng

logger = logging.getLogger(__name__)

Params = Dict[str, np.ndarray]
# (params, batch features, batch labels, rng) -> (mean batch loss, grads)
BatchObjective = Callable[[Params, np.ndarray, np.ndarray, Rng], Tuple[float, Params]]


class TrainConfig(BaseModel):
    """Mini-batch Adam schedule shared by every gradient-trained model."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs: int = Field(ge=1, default=30)
    # None takes one step per epoch on the whole training set
    batch_size: Optional[int] = Field(ge=1, default=32)
    lr: float = Field(ge=0.0, default=1e-3)
    seed: int = 0
    shuffle_each_epoch: bool = True
    l2: float = Field(ge=0.0, default=0.0)
    # Full-batch runs stop once the gradient norm falls below tol; 0 disables
    tol: float = Field(ge=0.0, default=0.0)


def require_two_classes(labels: np.ndarray, model: str):
    present = np.unique(labels)
    if present.size < 2:
        raise TrainingError(f"{model} needs both classes in the training data, got only {present.tolist()}")


def gradient_norm(grads: Params) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def train_minibatch(
    params: Params,
    objective: BatchObjective,
    features: np.ndarray,
    labels: np.ndarray,
    cfg: TrainConfig,
    rng: Rng,
    decay: Iterable[str] = (),
    model: str = "model",
) -> Tuple[Params, List[float]]:
    """
    Minimize `objective` with Adam over shuffled mini-batches.

    L2 (cfg.l2 / 2 * ||w||^2) is added for the parameters named in `decay`.
    When a batch spans the whole training set every epoch is one deterministic
    step on the mean loss, and cfg.tol ends training at a stationary point.
    Returns the final parameters and the per-epoch mean training loss.
    """
    require_two_classes(labels, model)
    decay = [name for name in decay if name in params]
    state = AdamState.for_params(params, lr=cfg.lr)
    n = features.shape[0]
    batch_size = n if cfg.batch_size is None else cfg.batch_size
    full_batch = batch_size >= n
    curve: List[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle_each_epoch and not full_batch else np.arange(n)
        total = 0.0
        converged = False
        for batch, start in enumerate(range(0, n, batch_size)):
            idx = order[start : start + batch_size]
            loss, grads = objective(params, features[idx], labels[idx], rng)
            if cfg.l2 > 0.0:
                grads = dict(grads)
                for name in decay:
                    w = params[name]
                    loss += 0.5 * cfg.l2 * float(np.sum(w * w))
                    grads[name] = grads[name] + cfg.l2 * w
            if not np.isfinite(loss):
                raise TrainingError(f"{model}: non-finite loss at epoch {epoch}, batch {batch}")
            if full_batch and cfg.tol > 0.0 and gradient_norm(grads) < cfg.tol:
                converged = True
                total += loss * idx.size
                break
            params, state = adam_step(params, grads, state)
            total += loss * idx.size
        curve.append(total / n)
        logger.debug(f"{model} epoch {epoch + 1}/{cfg.epochs}: loss {curve[-1]:.6f}")
        if converged:
            logger.info(f"{model} converged after {epoch} steps, final loss {curve[-1]:.6f}")
            return params, curve
    logger.info(f"{model} trained {cfg.epochs} epochs, final loss {curve[-1]:.6f}")
    return params, curve
