import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fraudbench.data.dataset import class_counts
from fraudbench.data.preprocess import (
    DataPreprocessor,
    FitOn,
    apply_iqr_bounds,
    balance_undersample,
    box_summaries,
    fit_standardizer,
    histogram,
    iqr_bounds,
    pearson_correlation,
    remove_outliers_iqr,
    shuffle,
    stratified_split,
    stratified_split_indices,
)
from fraudbench.errors import PreprocessError
from tests.helpers import CLOSE_IN_VALUE, make_dataset, v_dataset


def _row_set(ds):
    return sorted(map(tuple, np.column_stack([ds.features, ds.labels]).tolist()))


def test_balance_keeps_all_492_fraud_rows():
    ds = v_dataset(492, 4000, seed=1)
    balanced = balance_undersample(ds, seed=0)
    counts = class_counts(balanced)
    assert balanced.n_rows == 984
    assert counts.n_fraud == counts.n_legit == 492
    # Every fraud row survives exactly once (Time is a unique row id)
    fraud_times = sorted(balanced.column("Time")[balanced.labels == 1].tolist())
    assert fraud_times == sorted(ds.column("Time")[ds.labels == 1].tolist())


def test_balance_on_balanced_input_is_a_permutation():
    ds = make_dataset([[1.0], [2.0], [3.0], [4.0]], [1, 0, 1, 0])
    out = balance_undersample(ds, seed=5)
    assert out.n_rows == 4
    assert _row_set(out) == _row_set(ds)


@pytest.mark.parametrize("seed", [1, 2])
def test_balance_one_fraud_row(seed):
    ds = make_dataset(np.arange(6.0), [1, 0, 0, 0, 0, 0])
    out = balance_undersample(ds, seed)
    counts = class_counts(out)
    assert (counts.n_fraud, counts.n_legit) == (1, 1)


def test_balance_is_seeded():
    ds = v_dataset(20, 200)
    a = balance_undersample(ds, seed=9)
    b = balance_undersample(ds, seed=9)
    np.testing.assert_array_equal(a.features, b.features)


def test_balance_single_class_fails():
    with pytest.raises(PreprocessError, match="both classes"):
        balance_undersample(make_dataset([[1.0], [2.0]], [0, 0]), seed=0)


def test_shuffle_single_row():
    ds = make_dataset([[3.0]], [1])
    out = shuffle(ds, seed=1)
    np.testing.assert_array_equal(out.features, ds.features)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=40), st.integers(0, 2**31 - 1))
def test_shuffle_is_a_permutation(labels, seed):
    ds = make_dataset(np.arange(len(labels), dtype=float), labels)
    out = shuffle(ds, seed)
    assert _row_set(out) == _row_set(ds)
    np.testing.assert_array_equal(shuffle(ds, seed).features, out.features)


def test_pearson_fixture():
    ds = make_dataset(np.column_stack([[1, 2, 3, 4], [1, 3, 2, 4]]), [0, 1, 0, 1], columns=["x", "y"])
    cm = pearson_correlation(ds)
    assert cm.labels == ("x", "y", "Class")
    assert cm["x", "y"] == CLOSE_IN_VALUE(0.8, 1e-12)
    assert cm["y", "x"] == CLOSE_IN_VALUE(0.8, 1e-12)


def test_pearson_affine_and_sign():
    x = np.array([0.3, 1.7, 2.2, 5.0, 4.1])
    ds = make_dataset(np.column_stack([x, 2 * x + 3, -x]), [0, 1, 0, 1, 1], columns=["a", "b", "c"])
    cm = pearson_correlation(ds)
    assert cm["a", "b"] == CLOSE_IN_VALUE(1.0, 1e-12)
    assert cm["a", "c"] == CLOSE_IN_VALUE(-1.0, 1e-12)


def test_pearson_constant_column_is_flagged():
    ds = make_dataset(np.column_stack([[1.0, 2.0, 3.0], [7.0, 7.0, 7.0]]), [0, 1, 1], columns=["a", "k"])
    cm = pearson_correlation(ds)
    assert cm.constant == ("k",)
    assert cm["a", "k"] == 0.0
    assert cm["k", "k"] == 1.0


def test_pearson_needs_two_rows():
    with pytest.raises(PreprocessError):
        pearson_correlation(make_dataset([[1.0]], [1]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 100.0), st.floats(-50.0, 50.0))
def test_pearson_symmetric_and_affine_invariant(seed, scale, shift):
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(12, 3))
    labels = np.r_[np.zeros(6, dtype=int), np.ones(6, dtype=int)]
    cm = pearson_correlation(make_dataset(features, labels))
    assert np.max(np.abs(cm.values - cm.values.T)) <= 1e-12
    assert np.all(np.abs(cm.values) <= 1.0)
    rescaled = features.copy()
    rescaled[:, 1] = rescaled[:, 1] * scale + shift
    cm2 = pearson_correlation(make_dataset(rescaled, labels))
    assert np.max(np.abs(cm.values - cm2.values)) <= 1e-12


def test_iqr_fixture():
    b = iqr_bounds([1, 2, 3, 4, 5, 100])
    assert (b.q1, b.q3, b.iqr) == (CLOSE_IN_VALUE(2.25, 1e-12), CLOSE_IN_VALUE(4.75, 1e-12), CLOSE_IN_VALUE(2.5, 1e-12))
    assert b.lower == CLOSE_IN_VALUE(-1.5, 1e-12)
    assert b.upper == CLOSE_IN_VALUE(8.5, 1e-12)


@pytest.mark.parametrize("values, c", [([5.0], 5.0), ([2.0, 2.0, 2.0, 2.0], 2.0)])
def test_iqr_degenerate(values, c):
    b = iqr_bounds(values)
    assert b.q1 == b.q3 == b.lower == b.upper == c
    assert b.iqr == 0.0


def test_iqr_empty():
    with pytest.raises(PreprocessError):
        iqr_bounds([])


def test_remove_outliers_all_rows():
    ds = make_dataset([[1.0], [2.0], [3.0], [4.0], [5.0], [100.0]], [0, 1, 0, 1, 0, 1], columns=["V14"])
    kept, report = remove_outliers_iqr(ds, ["V14"], FitOn.ALL_ROWS)
    assert report.rows_removed == 1
    assert report.row_indices_removed == [5]
    assert kept.column("V14").tolist() == [1.0, 2.0, 3.0, 4.0, 5.0]
    # Boundary values survive and refiltering with the same bounds is a no-op
    again, removed = apply_iqr_bounds(kept, report.bounds)
    assert removed.size == 0
    assert again.n_rows == kept.n_rows


def test_remove_outliers_no_op():
    ds = make_dataset([[1.0], [2.0], [3.0], [4.0]], [0, 1, 0, 1], columns=["V14"])
    kept, report = remove_outliers_iqr(ds, ["V14"], FitOn.ALL_ROWS)
    assert report.rows_removed == 0
    np.testing.assert_array_equal(kept.features, ds.features)


def test_remove_outliers_fit_on_fraud_filters_every_row():
    # Fraud values span 1..5; the legit row at 50 lies outside their fences
    ds = make_dataset([[1.0], [2.0], [3.0], [4.0], [5.0], [50.0], [3.0]], [1, 1, 1, 1, 1, 0, 0], columns=["V14"])
    kept, report = remove_outliers_iqr(ds, ["V14"], FitOn.FRAUD_CLASS_ONLY)
    assert report.row_indices_removed == [5]
    assert report.fit_on == "fraud"


def test_remove_outliers_bounds_use_original_input():
    ds = v_dataset(40, 40, seed=3)
    _, forward = remove_outliers_iqr(ds, ["V14", "V12", "V10"], FitOn.FRAUD_CLASS_ONLY)
    _, backward = remove_outliers_iqr(ds, ["V10", "V12", "V14"], FitOn.FRAUD_CLASS_ONLY)
    assert forward.row_indices_removed == backward.row_indices_removed


def test_remove_outliers_unknown_feature():
    ds = make_dataset([[1.0], [2.0]], [0, 1], columns=["V14"])
    with pytest.raises(PreprocessError, match="unknown"):
        remove_outliers_iqr(ds, ["V99"])


def test_remove_outliers_fraud_fit_needs_fraud():
    ds = make_dataset([[1.0], [2.0]], [0, 0], columns=["V14"])
    with pytest.raises(PreprocessError):
        remove_outliers_iqr(ds, ["V14"], FitOn.FRAUD_CLASS_ONLY)


def test_stratified_split_492():
    ds = v_dataset(492, 492)
    train, test = stratified_split(ds, 0.2, seed=0)
    assert (class_counts(test).n_fraud, class_counts(test).n_legit) == (98, 98)
    assert (class_counts(train).n_fraud, class_counts(train).n_legit) == (394, 394)


def test_stratified_split_half_of_four():
    ds = make_dataset(np.arange(4.0), [0, 1, 0, 1])
    train, test = stratified_split(ds, 0.5, seed=0)
    assert class_counts(train).n_fraud == class_counts(test).n_fraud == 1


def test_stratified_split_errors():
    with pytest.raises(PreprocessError):
        stratified_split(make_dataset(np.arange(3.0), [0, 1, 0]), 0.5, seed=0)
    with pytest.raises(PreprocessError):
        stratified_split(make_dataset(np.arange(4.0), [0, 1, 0, 1]), 1.0, seed=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(2, 30), st.floats(0.05, 0.95), st.integers(0, 1000))
def test_stratified_split_disjoint_union(n0, n1, fraction, seed):
    labels = np.r_[np.zeros(n0, dtype=int), np.ones(n1, dtype=int)]
    train, test = stratified_split_indices(labels, fraction, seed)
    assert set(train).isdisjoint(test)
    assert sorted(np.concatenate([train, test]).tolist()) == list(range(n0 + n1))


def test_standardizer():
    train = make_dataset([[1.0, 5.0], [3.0, 5.0]], [0, 1])
    scaler = fit_standardizer(train)
    out = scaler.transform(train)
    np.testing.assert_allclose(out.features[:, 0], [-1.0, 1.0])
    # Zero-variance column keeps scale 1
    np.testing.assert_allclose(out.features[:, 1], [0.0, 0.0])


def test_histogram_and_box_summary():
    h = histogram([0.0, 1.0, 1.0, 2.0], "V14", "before", bins=2)
    assert h.counts.sum() == 4
    assert h.mean == CLOSE_IN_VALUE(1.0, 1e-12)
    frame = h.to_frame()
    assert list(frame.columns)[:3] == ["bin_left", "bin_right", "count"]
    ds = make_dataset([[1.0], [2.0], [3.0], [10.0]], [0, 0, 1, 1], columns=["V14"])
    rows = box_summaries(ds, ["V14"], "before")
    assert [r["class"] for r in rows] == [0, 1]
    assert rows[1]["max"] == 10.0


def test_data_preprocessor_records_stages():
    ds = v_dataset(50, 400, seed=2)
    result = DataPreprocessor(seed=0).process(ds)
    stages = [r["stage"] for r in result.class_count_records()]
    assert stages == ["input", "balanced", "output"]
    assert result.counts_balanced.n_fraud == result.counts_balanced.n_legit == 50
    assert result.counts_after.total == result.counts_balanced.total - result.outliers.rows_removed
    assert result.correlation_imbalanced is not None
    assert result.correlation_balanced is not None
    assert {h.feature for h in result.histograms} == {"V14", "V12", "V10"}


def test_data_preprocessor_without_balancing():
    ds = v_dataset(10, 30)
    result = DataPreprocessor(balance=False, outlier_features=[], analyze=False).process(ds)
    assert result.dataset.n_rows == 40
    assert result.outliers is None
    assert result.correlation_imbalanced is None
