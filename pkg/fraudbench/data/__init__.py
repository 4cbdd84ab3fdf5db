from .dataset import (
    LABEL_COLUMN,
    LabeledDataset,
    Schema,
    class_counts,
    load_csv,
    write_csv,
)
from .synthetic import SyntheticKind, SyntheticSpec, generate_synthetic
from .preprocess import (
    CorrelationMatrix,
    DataPreprocessor,
    FitOn,
    Standardizer,
    balance_undersample,
    fit_standardizer,
    iqr_bounds,
    pearson_correlation,
    remove_outliers_iqr,
    shuffle,
    stratified_split,
)
