# The MIT License (MIT)
# Copyright © 2024 fraudbench contributors

# Permission is hereby granted, free of charge, to any person obtaining a copy of this software and associated
# documentation files (the “Software”), to deal in the Software without restriction, including without limitation
# the rights to use, copy, modify, merge, publish, distribute, sublicense, and/or sell copies of the Software,
# and to permit persons to whom the Software is furnished to do so, subject to the following conditions:

# The above copyright notice and this permission notice shall be included in all copies or substantial portions of
# the Software.

# THE SOFTWARE IS PROVIDED “AS IS”, WITHOUT WARRANTY OF ANY KIND, EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO
# THE WARRANTIES OF MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL
# THE AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION
# OF CONTRACT, TORT OR OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER
# DEALINGS IN THE SOFTWARE.

from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from fraudbench.data.dataset import LEGACY_2013_HEADER, LabeledDataset, V_FEATURES, write_csv
from fraudbench.utils.config import ExperimentConfig, parse_config_text


class CLOSE_IN_VALUE:
    value: float
    tolerance: float

    def __init__(self, value: float, tolerance: float = 0.0) -> None:
        self.value = value
        self.tolerance = tolerance

    def __eq__(self, __o: float) -> bool:
        # True if __o \in [value - tolerance, value + tolerance]
        # or if value \in [__o - tolerance, __o + tolerance]
        return (
            (self.value - self.tolerance) <= __o
            and __o <= (self.value + self.tolerance)
        ) or (
            (__o - self.tolerance) <= self.value
            and self.value <= (__o + self.tolerance)
        )

    def __repr__(self) -> str:
        return f"{self.value!r} ± {self.tolerance!r}"


def make_dataset(features, labels, columns: Sequence[str] = None) -> LabeledDataset:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    if columns is None:
        columns = [f"x{i}" for i in range(features.shape[1])]
    return LabeledDataset(features, tuple(columns), np.asarray(labels, dtype=np.int64))


def v_dataset(n_fraud: int, n_legit: int, seed: int = 0) -> LabeledDataset:
    """Time, V1..V28, Amount rows with fraud shifted on V10/V12/V14."""
    rng = np.random.default_rng(seed)
    n = n_fraud + n_legit
    labels = np.r_[np.ones(n_fraud, dtype=np.int64), np.zeros(n_legit, dtype=np.int64)]
    v = rng.normal(size=(n, len(V_FEATURES)))
    for name in ("V10", "V12", "V14"):
        v[labels == 1, V_FEATURES.index(name)] -= 4.0
    time = np.arange(n, dtype=np.float64)
    amount = rng.uniform(0.0, 200.0, size=n)
    features = np.column_stack([time, v, amount])
    return LabeledDataset(features, tuple(["Time", *V_FEATURES, "Amount"]), labels)


def write_legacy_csv(path: Union[str, Path], rows: Iterable[Sequence], header: Sequence[str] = LEGACY_2013_HEADER) -> Path:
    path = Path(path)
    lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def legacy_row(label: int, fill: float = 0.5) -> list:
    return [0.0] + [fill] * len(V_FEATURES) + [12.5, label]


def synthetic_config(tmp_path, kind: str = "blobs", names: str = "logistic, transformer", n: int = 60, extra: str = "") -> ExperimentConfig:
    """A small synthetic experiment writing into tmp_path/run."""
    text = f"""
[data]
source = synthetic
synthetic_kind = {kind}
synthetic_n = {n}

[pipeline]
seed = 3
outlier_features =
test_fraction = 0.25

[models]
names = {names}

[transformer]
d_model = 8
n_heads = 2
n_layers = 1
d_ff = 16
epochs = 3
dropout_rate = 0.0

[logistic]
epochs = 20

[mlp]
epochs = 10

[output]
dir = {tmp_path / "run"}
{extra}
"""
    return parse_config_text(text, "test.cfg")


def offset_dataset(seed: int = 4) -> LabeledDataset:
    """Two classes far from the origin, with columns on very different scales."""
    rng = np.random.default_rng(seed)
    legit = rng.normal([1000.0, -500.0], [2.0, 0.05], size=(40, 2))
    fraud = rng.normal([1006.0, -499.85], [2.0, 0.05], size=(40, 2))
    return make_dataset(np.vstack([legit, fraud]), [0] * 40 + [1] * 40, columns=["a", "b"])


def offset_config(tmp_path, names: str = "knn") -> ExperimentConfig:
    path = write_csv(offset_dataset(), tmp_path / "offset.csv")
    text = f"""
[data]
source = csv
path = {path}

[pipeline]
seed = 0
outlier_features =
test_fraction = 0.25

[models]
names = {names}

[output]
dir = {tmp_path / "run"}
analysis = false
"""
    return parse_config_text(text, "offset.cfg")
