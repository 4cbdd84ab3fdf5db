"""Central-difference gradient checking for the hand-written backward passes."""

from dataclasses import dataclass
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np

from fraudbench.errors import NumericsError

LossAndGrads = Callable[[Dict[str, np.ndarray]], Tuple[float, Mapping[str, np.ndarray]]]


@dataclass(frozen=True)
class GradCheckReport:
    max_relative_error: float
    worst_parameter: Optional[str]
    worst_index: Optional[Tuple[int, ...]]
    n_checked: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error < self.tol


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)


def grad_check(
    f: LossAndGrads,
    params: Mapping[str, np.ndarray],
    h: float = 1e-4,
    tol: float = 1e-3,
) -> GradCheckReport:
    """
    Compare the analytic gradient reported by `f` against
    (f(theta + h) - f(theta - h)) / 2h on every coordinate.

    Args:
        f: maps a parameter dict to (loss, gradient dict). Must be deterministic.
        params: point at which to check; not modified.
        h: finite-difference step.
        tol: relative error above which the report fails.
    """
    theta = {k: np.array(v, dtype=np.float64, copy=True) for k, v in params.items()}
    loss, analytic = f(theta)
    if not np.isfinite(loss):
        raise NumericsError(f"loss is not finite at the check point: {loss}")

    worst = 0.0
    worst_name = None
    worst_index = None
    n_checked = 0
    for name, tensor in theta.items():
        grad = np.asarray(analytic[name], dtype=np.float64)
        for index in np.ndindex(tensor.shape):
            original = tensor[index]
            tensor[index] = original + h
            plus, _ = f(theta)
            tensor[index] = original - h
            minus, _ = f(theta)
            tensor[index] = original
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise NumericsError(f"loss is not finite when perturbing {name}{list(index)}")
            numeric = (plus - minus) / (2.0 * h)
            err = relative_error(float(grad[index]), numeric)
            n_checked += 1
            if err > worst:
                worst, worst_name, worst_index = err, name, tuple(int(i) for i in index)
    return GradCheckReport(worst, worst_name, worst_index, n_checked, tol)
