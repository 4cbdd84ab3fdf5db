import enum
import io
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from fraudbench.errors import DatasetError, ShapeError
from fraudbench.protocol import ClassCounts

logger = logging.getLogger(__name__)

LABEL_COLUMN = "Class"
V_FEATURES = [f"V{i}" for i in range(1, 29)]
LEGACY_2013_FEATURES = ["Time"] + V_FEATURES + ["Amount"]
MODERN_2023_FEATURES = V_FEATURES + ["Amount"]
LEGACY_2013_HEADER = LEGACY_2013_FEATURES + [LABEL_COLUMN]
MODERN_2023_HEADER = ["id"] + MODERN_2023_FEATURES + [LABEL_COLUMN]


class Schema(str, enum.Enum):
    LEGACY_2013 = "legacy2013"
    MODERN_2023 = "modern2023"
    GENERIC = "generic"
    AUTO_DETECT = "auto"


@dataclass(frozen=True)
class LabeledDataset:
    """
    Feature matrix with named columns and binary labels (1 = fraud).

    Arrays are copied and flagged read-only on construction, so a dataset can
    be shared between threads without locking.
    """

    features: np.ndarray
    columns: Tuple[str, ...]
    labels: np.ndarray

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64, copy=True)
        if features.ndim == 1 and features.size == 0:
            features = features.reshape(0, len(self.columns))
        labels = np.array(self.labels, copy=True).astype(np.int64).reshape(-1)
        columns = tuple(str(c) for c in self.columns)

        if features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {features.shape}")
        if features.shape[1] != len(columns):
            raise ShapeError(
                f"{features.shape[1]} feature columns but {len(columns)} column names"
            )
        if labels.shape[0] != features.shape[0]:
            raise ShapeError(
                f"{labels.shape[0]} labels for {features.shape[0]} feature rows"
            )
        if any(not c for c in columns):
            raise ShapeError("feature names must be non-empty")
        if len(set(columns)) != len(columns):
            raise ShapeError(f"duplicate feature names in {columns}")
        if not np.all(np.isfinite(features)):
            raise ShapeError("features contain NaN or Inf")
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise ShapeError("labels must be 0 or 1")

        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "columns", columns)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_cols(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n_rows

    def feature_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise KeyError(name) from None

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.feature_index(name)]

    def take(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.columns, self.labels[idx])

    def with_features(self, features: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(features, self.columns, self.labels)

    def drop_columns(self, names: Iterable[str]) -> "LabeledDataset":
        names = list(names)
        unknown = [n for n in names if n not in self.columns]
        if unknown:
            raise DatasetError(f"cannot drop unknown columns {unknown}")
        keep = [i for i, c in enumerate(self.columns) if c not in names]
        return LabeledDataset(
            self.features[:, keep], tuple(self.columns[i] for i in keep), self.labels
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=list(self.columns))
        frame[LABEL_COLUMN] = self.labels
        return frame

    @classmethod
    def concat(cls, parts: Sequence["LabeledDataset"]) -> "LabeledDataset":
        if not parts:
            raise ValueError("nothing to concatenate")
        columns = parts[0].columns
        for part in parts[1:]:
            if part.columns != columns:
                raise ShapeError("cannot concatenate datasets with different columns")
        return cls(
            np.vstack([p.features for p in parts]),
            columns,
            np.concatenate([p.labels for p in parts]),
        )


def class_counts(ds: LabeledDataset) -> ClassCounts:
    """Exact label tallies; the fraud ratio of an empty dataset is 0."""
    n_fraud = int(np.count_nonzero(ds.labels == 1))
    n_legit = int(ds.labels.shape[0] - n_fraud)
    total = n_fraud + n_legit
    ratio = n_fraud / total if total else 0.0
    return ClassCounts(n_fraud=n_fraud, n_legit=n_legit, fraud_ratio=ratio)


def detect_schema(header: Sequence[str]) -> Schema:
    header = list(header)
    if header == LEGACY_2013_HEADER:
        return Schema.LEGACY_2013
    if header == MODERN_2023_HEADER:
        return Schema.MODERN_2023
    return Schema.GENERIC


def _check_header(header: List[str], schema: Schema, path: Path, line: int = 1) -> Schema:
    if schema == Schema.AUTO_DETECT:
        schema = detect_schema(header)
    if schema == Schema.LEGACY_2013 and header != LEGACY_2013_HEADER:
        raise DatasetError(
            "header does not match the legacy2013 schema (Time,V1..V28,Amount,Class)",
            path, line,
        )
    if schema == Schema.MODERN_2023 and header != MODERN_2023_HEADER:
        raise DatasetError(
            "header does not match the modern2023 schema (id,V1..V28,Amount,Class)",
            path, line,
        )
    if LABEL_COLUMN not in header:
        raise DatasetError("missing Class column", path, line)
    if any(not h for h in header) or len(set(header)) != len(header):
        raise DatasetError(
            "header matches neither schema: empty or duplicate column names", path, line
        )
    return schema


def load_csv(path: Union[str, Path], schema: Union[Schema, str] = Schema.AUTO_DETECT) -> LabeledDataset:
    """
    Parse a credit-card transaction CSV into a LabeledDataset.

    Legacy2013 keeps Time as an ordinary feature; Modern2023 drops the id
    column. With AUTO_DETECT any other header that carries a Class column is
    read as a generic schema (this is how synthetic fixtures come back in).
    Parsing is strict: every problem is a DatasetError naming the line.
    """
    path = Path(path)
    schema = Schema(schema)
    if not path.is_file():
        raise DatasetError("file not found", path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except UnicodeDecodeError as exc:
        raise DatasetError(f"not UTF-8: {exc.reason}", path) from None

    # Blank lines are skipped; every reported line is the physical one
    physical = [i + 1 for i, line in enumerate(text.splitlines()) if line.strip()]
    if not physical:
        raise DatasetError("empty file: no header row", path)
    kept = "\n".join(line for line in text.splitlines() if line.strip())
    try:
        raw = pd.read_csv(
            io.StringIO(kept),
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except pd.errors.ParserError as exc:
        # pandas reports "Expected N fields in line L, saw M" against the kept lines
        found = re.search(r"line (\d+)", str(exc))
        line = physical[int(found.group(1)) - 1] if found and int(found.group(1)) <= len(physical) else None
        raise DatasetError(f"row width mismatch: {exc}", path, line) from None

    header = [str(h).strip() for h in raw.iloc[0].tolist()]
    schema = _check_header(header, schema, path, physical[0])

    body = raw.iloc[1:]
    body_lines = physical[1:]
    if body.shape[0] == 0:
        raise DatasetError("no data rows", path)

    missing = body.isna().to_numpy()
    if missing.any():
        row = int(np.argmax(missing.any(axis=1)))
        raise DatasetError(
            f"row width mismatch: expected {len(header)} fields", path, body_lines[row]
        )

    values = body.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        cell = str(body.iat[row, col]).strip()
        try:
            float(cell)
            problem = "non-finite value"
        except ValueError:
            problem = "non-numeric cell"
        raise DatasetError(
            f"{problem} {cell!r} in column {header[col]}", path, body_lines[int(row)]
        )

    label_col = header.index(LABEL_COLUMN)
    labels = values[:, label_col]
    not_binary = (labels != 0.0) & (labels != 1.0)
    if not_binary.any():
        row = int(np.argmax(not_binary))
        raise DatasetError(f"Class must be 0 or 1, got {labels[row]!r}", path, body_lines[row])

    drop = {LABEL_COLUMN}
    if schema == Schema.MODERN_2023:
        drop.add("id")
    keep = [i for i, h in enumerate(header) if h not in drop]
    ds = LabeledDataset(values[:, keep], tuple(header[i] for i in keep), labels.astype(np.int64))
    counts = class_counts(ds)
    logger.info(
        f"Loaded {ds.n_rows} rows x {ds.n_cols} features from {path} "
        f"({schema.value}); fraud {counts.n_fraud} ({counts.fraud_ratio:.3%})"
    )
    return ds


def write_csv(ds: LabeledDataset, path: Union[str, Path]) -> Path:
    """
    Write a dataset with 17 significant digits so reloading is exact.

    Column order follows the legacy2013 schema when a Time column exists and
    the modern2023 schema (without id) otherwise.
    """
    path = Path(path)
    columns = list(ds.columns)
    if set(columns) == set(LEGACY_2013_FEATURES):
        columns = LEGACY_2013_FEATURES
    elif set(columns) == set(MODERN_2023_FEATURES):
        columns = MODERN_2023_FEATURES
    frame = ds.to_frame()[columns + [LABEL_COLUMN]]
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return path
