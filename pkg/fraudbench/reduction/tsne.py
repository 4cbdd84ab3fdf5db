"""
Exact O(n^2) t-SNE.

Bandwidths are found per row by bisection on the entropy of the conditional
neighbour distribution; the embedding is optimized with momentum gradient
descent, per-coordinate gains and early exaggeration. All pairwise sums go
through explicit broadcasting instead of BLAS so runs are bitwise
reproducible regardless of thread count.
"""

import enum
import logging
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from fraudbench.data.dataset import LabeledDataset
from fraudbench.errors import ReductionError
from fraudbench.numerics.kernels import squared_distances
from fraudbench.numerics.rng import make_rng
from fraudbench.reduction.embedding import Embedding2D, ReductionMethod
from fraudbench.reduction.linear import pca_2d

logger = logging.getLogger(__name__)

MIN_ROWS = 10
INIT_STD = 1e-4
KL_FLOOR = 1e-12


class TsneInit(str, enum.Enum):
    RANDOM_GAUSSIAN = "random"
    PCA_INIT = "pca"


class TsneConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    perplexity: float = Field(gt=0.0, default=30.0)
    n_iter: int = Field(ge=1, default=1000)
    learning_rate: float = Field(gt=0.0, default=200.0)
    early_exaggeration: float = Field(ge=1.0, default=12.0)
    exaggeration_iters: int = Field(ge=0, default=250)
    seed: int = 0
    init: TsneInit = TsneInit.RANDOM_GAUSSIAN
    initial_momentum: float = 0.5
    final_momentum: float = 0.8
    momentum_switch_iter: int = Field(ge=0, default=250)
    min_gain: float = 0.01
    entropy_tol: float = Field(gt=0.0, default=1e-5)
    history_every: int = Field(ge=1, default=50)

    @model_validator(mode="after")
    def check_schedule(self) -> "TsneConfig":
        if self.exaggeration_iters > self.n_iter:
            raise ValueError("exaggeration_iters must not exceed n_iter")
        return self


def _row_entropy_bits(d_row: np.ndarray, beta: float) -> Tuple[float, np.ndarray]:
    shifted = d_row - d_row.min()
    p = np.exp(-shifted * beta)
    total = p.sum()
    h_nats = np.log(total) + beta * np.sum(shifted * p) / total
    return h_nats / np.log(2.0), p / total


def conditional_probabilities(
    distances: np.ndarray, perplexity: float, tol: float = 1e-5, max_steps: int = 200
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Row-wise Gaussian conditionals p(j|i) whose entropy matches log2(perplexity).

    Returns:
        (n x n conditional matrix with zero diagonal, per-row precisions beta).
    """
    n = distances.shape[0]
    target = np.log2(perplexity)
    cond = np.zeros((n, n))
    betas = np.ones(n)
    for i in range(n):
        d_row = np.delete(distances[i], i)
        beta, lo, hi = 1.0, 0.0, np.inf
        h, p = _row_entropy_bits(d_row, beta)
        for _ in range(max_steps):
            diff = h - target
            if abs(diff) <= tol:
                break
            if diff > 0:
                lo = beta
                beta = beta * 2.0 if np.isinf(hi) else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
            h, p = _row_entropy_bits(d_row, beta)
        else:
            logger.debug(f"Bandwidth search for row {i} stopped at entropy error {h - target:.2e}")
        cond[i, np.arange(n) != i] = p
        betas[i] = beta
    return cond, betas


def row_perplexities(cond: np.ndarray) -> np.ndarray:
    """2 ** entropy (bits) of each conditional row."""
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(cond > 0.0, np.log2(cond), 0.0)
    return 2.0 ** (-np.sum(cond * logs, axis=1))


def joint_probabilities(features: np.ndarray, perplexity: float, tol: float = 1e-5) -> np.ndarray:
    """Symmetrized P = (P_cond + P_cond^T) / 2n; sums to 1."""
    n = features.shape[0]
    cond, _ = conditional_probabilities(squared_distances(features), perplexity, tol)
    return (cond + cond.T) / (2.0 * n)


def _student_t(y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    num = 1.0 / (1.0 + squared_distances(y))
    np.fill_diagonal(num, 0.0)
    return num, num / num.sum()


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0.0
    return float(np.sum(p[mask] * np.log(p[mask] / np.maximum(q[mask], KL_FLOOR))))


def _gradient(p: np.ndarray, q: np.ndarray, num: np.ndarray, y: np.ndarray) -> np.ndarray:
    pq = (p - q) * num
    diff = y[:, None, :] - y[None, :, :]
    return 4.0 * np.sum(pq[:, :, None] * diff, axis=1)


def _initial_points(ds: LabeledDataset, cfg: TsneConfig, rng) -> np.ndarray:
    if cfg.init == TsneInit.PCA_INIT:
        points = pca_2d(ds).points
        scale = points[:, 0].std()
        return points / scale * INIT_STD if scale > 0 else points
    return rng.normal(0.0, INIT_STD, size=(ds.n_rows, 2))


def tsne_2d(ds: LabeledDataset, cfg: TsneConfig = TsneConfig()) -> Embedding2D:
    n = ds.n_rows
    if n < MIN_ROWS:
        raise ReductionError(f"t-SNE needs at least {MIN_ROWS} rows, got {n}")
    if not cfg.perplexity < (n - 1) / 3.0:
        raise ReductionError(
            f"perplexity {cfg.perplexity} is infeasible for {n} rows (needs < {(n - 1) / 3.0:.2f})"
        )

    rng = make_rng(cfg.seed)
    p = joint_probabilities(ds.features, cfg.perplexity, cfg.entropy_tol)
    y = _initial_points(ds, cfg, rng)
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    history: List[Tuple[int, float]] = []
    kl_after_exaggeration = None

    for it in range(cfg.n_iter):
        exaggerating = it < cfg.exaggeration_iters
        momentum = cfg.initial_momentum if it < cfg.momentum_switch_iter else cfg.final_momentum
        num, q = _student_t(y)
        if it == cfg.exaggeration_iters:
            kl_after_exaggeration = kl_divergence(p, q)
        if it % cfg.history_every == 0:
            history.append((it, kl_divergence(p, q)))

        grad = _gradient(p * cfg.early_exaggeration if exaggerating else p, q, num, y)
        if not np.all(np.isfinite(grad)):
            raise ReductionError(f"t-SNE gradient became non-finite at iteration {it}")

        same_sign = (grad > 0.0) == (update > 0.0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, cfg.min_gain, out=gains)
        update = momentum * update - cfg.learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)

    _, q = _student_t(y)
    final_kl = kl_divergence(p, q)
    history.append((cfg.n_iter, final_kl))
    if kl_after_exaggeration is None:
        kl_after_exaggeration = final_kl
    logger.info(f"t-SNE on {n} rows: final KL {final_kl:.4f} (after exaggeration {kl_after_exaggeration:.4f})")
    diagnostics = {
        "final_kl": final_kl,
        "kl_after_exaggeration": kl_after_exaggeration,
        "kl_history": history,
        "perplexity": cfg.perplexity,
    }
    return Embedding2D(y, ds.labels, ReductionMethod.TSNE, diagnostics)
