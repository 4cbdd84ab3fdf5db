"""
PCA and Truncated SVD on top of a one-sided Jacobi SVD.

The covariance route is avoided on purpose: it squares the condition number.
"""

import logging
from typing import Tuple

import numpy as np

from fraudbench.data.dataset import LabeledDataset
from fraudbench.errors import ReductionError
from fraudbench.reduction.embedding import Embedding2D, ReductionMethod

logger = logging.getLogger(__name__)

MAX_SWEEPS = 100


def _rotate(m: np.ndarray, p: int, q: int, c: float, s: float):
    mp = m[:, p].copy()
    mq = m[:, q]
    m[:, p] = c * mp - s * mq
    m[:, q] = s * mp + c * mq


def jacobi_svd(a: np.ndarray, max_sweeps: int = MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Thin SVD a = U @ diag(s) @ Vt by one-sided (Hestenes) Jacobi rotations.

    Columns are rotated pairwise until every pair is orthogonal to working
    precision. Singular values come back in descending order; columns of U
    for zero singular values are left as zeros.

    Args:
        a: m x n real matrix.

    Returns:
        U (m x k), s (k,), Vt (k x n) with k = min(m, n).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ReductionError(f"jacobi_svd needs a non-empty 2-D matrix, got shape {a.shape}")
    m, n = a.shape
    if m < n:
        v, s, ut = jacobi_svd(a.T, max_sweeps)
        return ut.T, s, v.T

    u = a.copy()
    v = np.eye(n)
    tol = np.finfo(np.float64).eps * max(m, 16)
    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = float(u[:, p] @ u[:, p])
                beta = float(u[:, q] @ u[:, q])
                gamma = float(u[:, p] @ u[:, q])
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                _rotate(u, p, q, c, s)
                _rotate(v, p, q, c, s)
        if not rotated:
            break
    else:
        logger.warning(f"Jacobi SVD stopped after {max_sweeps} sweeps without full convergence")

    sv = np.sqrt(np.sum(u * u, axis=0))
    order = np.argsort(-sv, kind="stable")
    sv = sv[order]
    u = u[:, order]
    v = v[:, order]
    nonzero = sv > 0.0
    u[:, nonzero] = u[:, nonzero] / sv[nonzero]
    u[:, ~nonzero] = 0.0
    return u, sv, v.T


def fix_signs(u: np.ndarray, vt: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Flip each component so its largest-magnitude loading is positive."""
    u = u.copy()
    vt = vt.copy()
    for k in range(vt.shape[0]):
        j = int(np.argmax(np.abs(vt[k])))
        if vt[k, j] < 0:
            vt[k] = -vt[k]
            u[:, k] = -u[:, k]
    return u, vt


def _check_size(ds: LabeledDataset, method: str):
    if ds.n_rows < 3:
        raise ReductionError(f"{method} needs at least 3 rows, got {ds.n_rows}")
    if ds.n_cols < 2:
        raise ReductionError(f"{method} needs at least 2 feature columns, got {ds.n_cols}")


def pca_2d(ds: LabeledDataset) -> Embedding2D:
    _check_size(ds, "PCA")
    centered = ds.features - ds.features.mean(axis=0)
    if not np.any(centered):
        raise ReductionError("PCA input is degenerate: all rows are identical")
    u, s, vt = jacobi_svd(centered)
    u, vt = fix_signs(u, vt)
    variance = s * s
    ratio = variance / variance.sum()
    points = u[:, :2] * s[:2]
    diagnostics = {
        "explained_variance_ratio": ratio[:2].tolist(),
        "explained_variance": (variance[:2] / (ds.n_rows - 1)).tolist(),
        "singular_values": s[:2].tolist(),
        "components": vt[:2].tolist(),
    }
    logger.debug(f"PCA explained variance ratio {ratio[:2]}")
    return Embedding2D(points, ds.labels, ReductionMethod.PCA, diagnostics)


def truncated_svd_2d(ds: LabeledDataset) -> Embedding2D:
    """Rank-2 SVD of the uncentered matrix; points are U_2 * S_2."""
    _check_size(ds, "Truncated SVD")
    if not np.any(ds.features):
        raise ReductionError("Truncated SVD input is degenerate: all-zero matrix")
    u, s, vt = jacobi_svd(ds.features)
    u, vt = fix_signs(u, vt)
    points = u[:, :2] * s[:2]
    diagnostics = {
        "singular_values": s[:2].tolist(),
        "components": vt[:2].tolist(),
    }
    return Embedding2D(points, ds.labels, ReductionMethod.TRUNCATED_SVD, diagnostics)
