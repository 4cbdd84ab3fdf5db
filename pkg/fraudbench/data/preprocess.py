import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from fraudbench.data.dataset import LABEL_COLUMN, LabeledDataset, class_counts
from fraudbench.errors import PreprocessError
from fraudbench.numerics.rng import make_rng
from fraudbench.protocol import ClassCounts, IqrBounds, OutlierRemovalReport

logger = logging.getLogger(__name__)

IQR_FENCE = 1.5
DEFAULT_OUTLIER_FEATURES = ("V14", "V12", "V10")


class FitOn(str, enum.Enum):
    FRAUD_CLASS_ONLY = "fraud"
    ALL_ROWS = "all"


def _require_both_classes(ds: LabeledDataset, what: str) -> ClassCounts:
    counts = class_counts(ds)
    if counts.n_fraud == 0 or counts.n_legit == 0:
        raise PreprocessError(
            f"{what} needs both classes, got {counts.n_fraud} fraud / {counts.n_legit} legit rows"
        )
    return counts


# --- balancing and shuffling ------------------------------------------------


def balance_undersample(ds: LabeledDataset, seed: int) -> LabeledDataset:
    """
    Keep every minority row plus an equal-size sample of the majority class
    drawn without replacement, then shuffle the result.
    """
    counts = _require_both_classes(ds, "balance_undersample")
    rng = make_rng(seed)
    minority = 1 if counts.n_fraud <= counts.n_legit else 0
    minority_idx = np.flatnonzero(ds.labels == minority)
    majority_idx = np.flatnonzero(ds.labels != minority)
    sampled = rng.choice(majority_idx, size=minority_idx.size, replace=False)
    merged = np.concatenate([minority_idx, np.sort(sampled)])
    balanced = ds.take(merged[rng.permutation(merged.size)])
    logger.info(
        f"Balanced {ds.n_rows} rows to {balanced.n_rows} ({minority_idx.size} per class)"
    )
    return balanced


def shuffle(ds: LabeledDataset, seed: int) -> LabeledDataset:
    return ds.take(make_rng(seed).permutation(ds.n_rows))


# --- correlation ----------------------------------------------------------


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pearson matrix over the features with Class appended as the last column."""

    labels: Tuple[str, ...]
    values: np.ndarray
    constant: Tuple[str, ...] = ()

    def __getitem__(self, key: Tuple[str, str]) -> float:
        i = self.labels.index(key[0])
        j = self.labels.index(key[1])
        return float(self.values[i, j])

    def with_class(self) -> Dict[str, float]:
        """Each feature's correlation with the label."""
        last = self.values[:, -1]
        return {name: float(last[i]) for i, name in enumerate(self.labels[:-1])}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.values, index=list(self.labels), columns=list(self.labels))


def pearson_correlation(ds: LabeledDataset) -> CorrelationMatrix:
    if ds.n_rows < 2:
        raise PreprocessError(f"pearson_correlation needs at least 2 rows, got {ds.n_rows}")
    labels = tuple(ds.columns) + (LABEL_COLUMN,)
    data = np.hstack([ds.features, ds.labels.astype(np.float64)[:, None]])

    constant = np.ptp(data, axis=0) == 0.0
    centered = data - data.mean(axis=0)
    cross = centered.T @ centered
    norms = np.sqrt(np.diag(cross))
    norms[constant] = 1.0
    values = cross / np.outer(norms, norms)
    values[constant, :] = 0.0
    values[:, constant] = 0.0
    values = 0.5 * (values + values.T)
    np.clip(values, -1.0, 1.0, out=values)
    np.fill_diagonal(values, 1.0)

    flagged = tuple(labels[i] for i in np.flatnonzero(constant))
    if flagged:
        logger.warning(f"Constant columns get zero correlation: {list(flagged)}")
    values.setflags(write=False)
    return CorrelationMatrix(labels, values, flagged)


# --- IQR outliers -----------------------------------------------------------


def iqr_bounds(values, feature: str = "") -> IqrBounds:
    """Quartiles by linear interpolation at p*(n-1); fences at 1.5 IQR."""
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise PreprocessError(f"cannot fit IQR bounds on an empty vector {feature}".strip())
    q1, q3 = np.quantile(values, [0.25, 0.75], method="linear")
    q1, q3 = float(q1), float(q3)
    iqr = q3 - q1
    return IqrBounds(
        feature=feature,
        q1=q1,
        q3=q3,
        iqr=iqr,
        lower=q1 - IQR_FENCE * iqr,
        upper=q3 + IQR_FENCE * iqr,
    )


def fit_outlier_bounds(
    ds: LabeledDataset,
    features: Sequence[str] = DEFAULT_OUTLIER_FEATURES,
    fit_on: FitOn = FitOn.FRAUD_CLASS_ONLY,
) -> List[IqrBounds]:
    fit_on = FitOn(fit_on)
    unknown = [f for f in features if f not in ds.columns]
    if unknown:
        raise PreprocessError(f"unknown outlier feature(s): {unknown}")
    if fit_on == FitOn.FRAUD_CLASS_ONLY:
        mask = ds.labels == 1
        if not mask.any():
            raise PreprocessError("fit_on=fraud needs at least one fraud row")
    else:
        mask = np.ones(ds.n_rows, dtype=bool)
    return [iqr_bounds(ds.column(f)[mask], f) for f in features]


def apply_iqr_bounds(
    ds: LabeledDataset, bounds: Sequence[IqrBounds]
) -> Tuple[LabeledDataset, np.ndarray]:
    """Drop rows strictly outside any fence. Returns (kept rows, removed row indices)."""
    outside = np.zeros(ds.n_rows, dtype=bool)
    for b in bounds:
        column = ds.column(b.feature)
        outside |= (column < b.lower) | (column > b.upper)
    removed = np.flatnonzero(outside)
    return ds.take(np.flatnonzero(~outside)), removed


def remove_outliers_iqr(
    ds: LabeledDataset,
    features: Sequence[str] = DEFAULT_OUTLIER_FEATURES,
    fit_on: FitOn = FitOn.FRAUD_CLASS_ONLY,
) -> Tuple[LabeledDataset, OutlierRemovalReport]:
    """
    Fit all fences on the original input, then filter every row against them
    jointly, so the order of `features` does not matter.
    """
    fit_on = FitOn(fit_on)
    bounds = fit_outlier_bounds(ds, features, fit_on)
    kept, removed = apply_iqr_bounds(ds, bounds)
    report = OutlierRemovalReport(
        bounds=bounds,
        fit_on=fit_on.value,
        rows_removed=int(removed.size),
        row_indices_removed=[int(i) for i in removed],
    )
    logger.info(
        f"IQR outlier removal on {list(features)} (fit on {fit_on.value}): "
        f"removed {report.rows_removed} of {ds.n_rows} rows"
    )
    return kept, report


# --- splitting and scaling ----------------------------------------------------


def stratified_split_indices(
    labels: np.ndarray, test_fraction: float, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    if not 0.0 < test_fraction < 1.0:
        raise PreprocessError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = make_rng(seed)
    train_parts, test_parts = [], []
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            raise PreprocessError(
                f"class {cls} has {idx.size} row(s); stratified split needs at least 2"
            )
        n_test = max(1, int(math.floor(idx.size * test_fraction + 0.5)))
        n_test = min(n_test, idx.size - 1)
        picked = rng.permutation(idx)
        test_parts.append(picked[:n_test])
        train_parts.append(picked[n_test:])
    train = np.concatenate(train_parts)
    test = np.concatenate(test_parts)
    return train[rng.permutation(train.size)], test[rng.permutation(test.size)]


def stratified_split(
    ds: LabeledDataset, test_fraction: float, seed: int
) -> Tuple[LabeledDataset, LabeledDataset]:
    """Per class, round(count * test_fraction) rows (at least 1) go to the test half."""
    train_idx, test_idx = stratified_split_indices(ds.labels, test_fraction, seed)
    return ds.take(train_idx), ds.take(test_idx)


@dataclass(frozen=True)
class Standardizer:
    columns: Tuple[str, ...]
    mean: np.ndarray
    scale: np.ndarray

    def transform_features(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.scale

    def transform(self, ds: LabeledDataset) -> LabeledDataset:
        if ds.columns != self.columns:
            raise PreprocessError("standardizer was fitted on different columns")
        return ds.with_features(self.transform_features(ds.features))


def fit_standardizer(ds: LabeledDataset) -> Standardizer:
    """Per-feature z-score; zero-variance columns keep scale 1."""
    if ds.n_rows == 0:
        raise PreprocessError("cannot fit a standardizer on an empty dataset")
    mean = ds.features.mean(axis=0)
    std = ds.features.std(axis=0)
    scale = np.where(std > 0.0, std, 1.0)
    return Standardizer(ds.columns, mean, scale)


# --- distribution summaries -------------------------------------------------


@dataclass(frozen=True)
class Histogram:
    """Counts over equal-width bins plus the normal fitted to the same values."""

    feature: str
    stage: str
    edges: np.ndarray
    counts: np.ndarray
    mean: float
    std: float

    def normal_density(self) -> np.ndarray:
        centers = 0.5 * (self.edges[:-1] + self.edges[1:])
        if self.std == 0.0:
            return np.zeros_like(centers)
        z = (centers - self.mean) / self.std
        return np.exp(-0.5 * z * z) / (self.std * math.sqrt(2.0 * math.pi))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "bin_left": self.edges[:-1],
                "bin_right": self.edges[1:],
                "count": self.counts,
                "normal_density": self.normal_density(),
                "fit_mean": self.mean,
                "fit_std": self.std,
            }
        )


def histogram(values, feature: str, stage: str, bins: int = 30) -> Histogram:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise PreprocessError(f"no values to summarize for {feature} ({stage})")
    counts, edges = np.histogram(values, bins=bins)
    return Histogram(feature, stage, edges, counts, float(values.mean()), float(values.std()))


def five_number_summary(values) -> Dict[str, float]:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise PreprocessError("no values to summarize")
    q = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return dict(zip(("min", "q1", "median", "q3", "max"), (float(v) for v in q)))


def box_summaries(ds: LabeledDataset, features: Sequence[str], stage: str) -> List[Dict]:
    rows = []
    for feature in features:
        column = ds.column(feature)
        for cls in (0, 1):
            values = column[ds.labels == cls]
            if values.size == 0:
                continue
            rows.append({"feature": feature, "stage": stage, "class": cls, **five_number_summary(values)})
    return rows


# --- orchestration ----------------------------------------------------------


@dataclass
class PreprocessResult:
    dataset: LabeledDataset
    counts_before: ClassCounts
    counts_after: ClassCounts
    counts_balanced: Optional[ClassCounts] = None
    outliers: Optional[OutlierRemovalReport] = None
    correlation_imbalanced: Optional[CorrelationMatrix] = None
    correlation_balanced: Optional[CorrelationMatrix] = None
    histograms: List[Histogram] = field(default_factory=list)
    box_summaries: List[Dict] = field(default_factory=list)

    def class_count_records(self) -> List[Dict]:
        stages = [("input", self.counts_before)]
        if self.counts_balanced is not None:
            stages.append(("balanced", self.counts_balanced))
        stages.append(("output", self.counts_after))
        return [{"stage": stage, **counts.to_record()} for stage, counts in stages]


class DataPreprocessor:
    """
    Runs balance -> outlier removal on one dataset and keeps the analysis
    artifacts (class counts, correlation before/after balancing, distribution
    summaries of the outlier features) for the emitters.
    """

    def __init__(
        self,
        balance: bool = True,
        outlier_features: Sequence[str] = DEFAULT_OUTLIER_FEATURES,
        fit_on: FitOn = FitOn.FRAUD_CLASS_ONLY,
        seed: int = 0,
        analyze: bool = True,
    ):
        self.balance = balance
        self.outlier_features = list(outlier_features)
        self.fit_on = FitOn(fit_on)
        self.seed = seed
        self.analyze = analyze

    def process(self, ds: LabeledDataset) -> PreprocessResult:
        result = PreprocessResult(
            dataset=ds, counts_before=class_counts(ds), counts_after=class_counts(ds)
        )
        if self.analyze and ds.n_rows >= 2:
            result.correlation_imbalanced = pearson_correlation(ds)

        current = ds
        if self.balance:
            current = balance_undersample(current, self.seed)
            result.counts_balanced = class_counts(current)
            if self.analyze:
                result.correlation_balanced = pearson_correlation(current)

        if self.outlier_features:
            before = current
            current, result.outliers = remove_outliers_iqr(
                current, self.outlier_features, self.fit_on
            )
            if self.analyze:
                result.histograms = self._fraud_histograms(before, current)
                result.box_summaries = box_summaries(
                    before, self.outlier_features, "before"
                ) + box_summaries(current, self.outlier_features, "after")

        result.dataset = current
        result.counts_after = class_counts(current)
        return result

    def _fraud_histograms(self, before: LabeledDataset, after: LabeledDataset) -> List[Histogram]:
        out = []
        for feature in self.outlier_features:
            for stage, part in (("before", before), ("after", after)):
                values = part.column(feature)[part.labels == 1]
                if values.size:
                    out.append(histogram(values, feature, stage))
        return out
