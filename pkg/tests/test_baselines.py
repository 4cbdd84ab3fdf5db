import numpy as np
import pytest

from fraudbench.data.preprocess import fit_standardizer
from fraudbench.data.synthetic import SyntheticKind, SyntheticSpec, generate_synthetic
from fraudbench.errors import ConfigError, ModelFormatError, ShapeError, TrainingError
from fraudbench.models import MODEL_REGISTRY, build_model, load_any, model_class
from fraudbench.models.knn import KNearestNeighbors, KnnSettings
from fraudbench.models.logistic import LogisticRegression, LogisticSettings
from fraudbench.models.mlp import Mlp, MlpSettings, init_mlp, mlp_loss_and_grads, mlp_shapes
from fraudbench.models.svm import LinearSvm, SvmSettings
from fraudbench.models.tree import DecisionTree, TreeSettings, best_split, gini
from fraudbench.numerics.gradcheck import grad_check
from fraudbench.numerics.rng import make_rng
from fraudbench.validator.metrics import roc_auc
from tests.helpers import make_dataset


def _blobs(n=100, seed=1):
    return generate_synthetic(SyntheticSpec(n_per_class=n, kind=SyntheticKind.GAUSSIAN_BLOBS, seed=seed))


def _accuracy(model, ds):
    return float(np.mean(model.predict_batch(ds.features) == ds.labels))


def test_registry_order_and_lookup():
    assert list(MODEL_REGISTRY) == ["transformer", "logistic", "knn", "svm", "tree", "mlp"]
    assert model_class("knn") is KNearestNeighbors
    with pytest.raises(ConfigError, match="unknown model"):
        model_class("xgboost")
    with pytest.raises(TypeError):
        build_model("knn", TreeSettings())


def test_logistic_separates_sign():
    x = np.r_[np.linspace(-3, -0.5, 10), np.linspace(0.5, 3, 10)]
    ds = make_dataset(x, (x > 0).astype(int))
    model = LogisticRegression(LogisticSettings(epochs=200, batch_size=4, lr=0.05)).fit(ds, seed=0)
    assert _accuracy(model, ds) == 1.0


def test_logistic_zero_weights_score_half():
    model = LogisticRegression()
    model.init_params(3)
    np.testing.assert_array_equal(model._score(np.ones((4, 3))), 0.5)


def _boundary(model):
    return -model.params["bias"][0] / model.params["weight"][0]


def test_logistic_boundary_ignores_duplicated_rows():
    rng = np.random.default_rng(0)
    x = rng.normal(size=120)
    y = (x + rng.normal(scale=1.0, size=120) > 0.2).astype(int)
    once = LogisticRegression().fit(make_dataset(x, y), seed=0)
    twice = LogisticRegression().fit(make_dataset(np.r_[x, x], np.r_[y, y]), seed=0)
    assert abs(_boundary(once) - _boundary(twice)) < 1e-6


def test_logistic_full_batch_stops_at_tolerance():
    rng = np.random.default_rng(3)
    x = rng.normal(size=80)
    y = (x + rng.normal(size=80) > 0).astype(int)
    model = LogisticRegression(LogisticSettings(epochs=5000, tol=1e-3)).fit(make_dataset(x, y))
    # Check training ended before the epoch cap
    assert len(model.loss_curve) < 5000
    # Check the loss is not increasing at the end
    assert model.loss_curve[-1] <= model.loss_curve[0]


def test_knn_exact_match_and_global_fraction():
    ds = make_dataset([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]], [0, 0, 1, 1])
    one = KNearestNeighbors(KnnSettings(k=1)).fit(ds)
    np.testing.assert_array_equal(one.score_batch(ds.features), ds.labels)
    every = KNearestNeighbors(KnnSettings(k=4)).fit(ds)
    np.testing.assert_allclose(every.score_batch(np.array([[9.0, 9.0], [-3.0, 0.0]])), 0.5)


def test_knn_fixture_score():
    ds = make_dataset([[0.0], [1.0], [3.0], [6.0]], [1, 0, 1, 0])
    knn = KNearestNeighbors(KnnSettings(k=3)).fit(ds)
    # Neighbours of 2.0 are 1.0, 3.0 and 0.0 (distances 1, 1, 2)
    assert knn.score([2.0]) == pytest.approx(2.0 / 3.0)


def test_knn_is_permutation_invariant_without_ties():
    rng = make_rng(0)
    features = rng.normal(size=(30, 3))
    labels = rng.integers(0, 2, size=30)
    queries = rng.normal(size=(10, 3))
    a = KNearestNeighbors(KnnSettings(k=5)).fit(make_dataset(features, labels))
    perm = rng.permutation(30)
    b = KNearestNeighbors(KnnSettings(k=5)).fit(make_dataset(features[perm], labels[perm]))
    np.testing.assert_array_equal(a.score_batch(queries), b.score_batch(queries))


def test_knn_k_larger_than_train():
    with pytest.raises(TrainingError):
        KNearestNeighbors(KnnSettings(k=5)).fit(make_dataset([[0.0], [1.0]], [0, 1]))


def test_svm_separable_fixture():
    x = np.array([[-2.0, -1.0], [-1.0, -2.0], [-1.5, -1.5], [2.0, 1.0], [1.0, 2.0], [1.5, 1.5]])
    labels = np.array([0, 0, 0, 1, 1, 1])
    model = LinearSvm(SvmSettings(epochs=300, batch_size=6, lr=0.05)).fit(make_dataset(x, labels))
    margins = model.score_batch(x)
    assert _accuracy(model, make_dataset(x, labels)) == 1.0
    assert np.all(np.where(labels == 1, margins, -margins) >= 0.0)
    scaled = LinearSvm(SvmSettings(epochs=300, batch_size=6, lr=0.05)).fit(make_dataset(2 * x, labels))
    assert _accuracy(scaled, make_dataset(2 * x, labels)) == 1.0
    assert model.threshold == 0.0


def test_gini():
    assert gini(np.array([0, 0, 1, 1])) == 0.5
    assert gini(np.array([1, 1])) == 0.0


def test_tree_pure_node_is_a_leaf():
    tree = DecisionTree().fit(make_dataset([[1.0], [2.0], [3.0]], [1, 1, 1]))
    assert len(tree.nodes) == 1
    assert tree.nodes[0].is_leaf


def test_tree_solves_xor():
    ds = make_dataset([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]], [0, 1, 1, 0])
    tree = DecisionTree(TreeSettings(max_depth=2)).fit(ds)
    assert _accuracy(tree, ds) == 1.0
    assert tree.depth == 2


def _brute_force_split(features, labels):
    best = None
    for f in range(features.shape[1]):
        values = np.unique(features[:, f])
        for lo, hi in zip(values[:-1], values[1:]):
            t = 0.5 * (lo + hi)
            left = labels[features[:, f] <= t]
            right = labels[features[:, f] > t]
            score = (left.size * gini(left) + right.size * gini(right)) / labels.size
            if best is None or score < best[2] - 1e-12:
                best = (f, t, score)
    return best


def test_best_split_matches_brute_force():
    features = np.array([[1.0, 7.0], [2.0, 3.0], [3.0, 5.0], [4.0, 1.0], [5.0, 4.0], [6.0, 2.0]])
    labels = np.array([0, 1, 0, 1, 0, 1])
    f, t, score = best_split(features, labels)
    bf, bt, bscore = _brute_force_split(features, labels)
    assert (f, t) == (bf, bt)
    assert score == pytest.approx(bscore, abs=1e-12)


def test_tree_fits_training_rows_at_full_depth():
    rng = make_rng(3)
    features = rng.normal(size=(40, 3))
    labels = rng.integers(0, 2, size=40)
    tree = DecisionTree(TreeSettings(max_depth=40)).fit(make_dataset(features, labels))
    np.testing.assert_array_equal(tree.predict_batch(features), labels)


def test_mlp_zero_output_layer_scores_half():
    params = init_mlp(3, make_rng(0))
    model = Mlp()
    model.params = params
    np.testing.assert_array_equal(model._score(make_rng(1).normal(size=(5, 3))), 0.5)


def test_mlp_gradients():
    rng = make_rng(2)
    params = init_mlp(3, rng)
    params["out.weight"] = rng.normal(0.0, 0.5, size=mlp_shapes(3)["out.weight"])
    rows = rng.normal(size=(2, 3))
    report = grad_check(lambda p: mlp_loss_and_grads(p, rows, np.array([0, 1])), params)
    assert report.max_relative_error < 1e-3


def test_mlp_fits_blobs():
    ds = _blobs()
    model = Mlp(MlpSettings(epochs=100, lr=1e-2)).fit(ds, seed=0)
    assert model.loss_curve[-1] < 0.1


@pytest.mark.parametrize("name", list(MODEL_REGISTRY))
def test_refit_with_same_seed_is_bitwise_identical(name):
    ds = _blobs(n=20)
    settings = model_class(name).Settings(epochs=3) if name in ("transformer", "logistic", "svm", "mlp") else None
    if name == "transformer":
        settings = model_class(name).Settings(d_model=4, n_heads=2, n_layers=1, d_ff=8, epochs=2)
    a = build_model(name, settings).fit(ds, seed=5)
    b = build_model(name, settings).fit(ds, seed=5)
    np.testing.assert_array_equal(a.score_dataset(ds), b.score_dataset(ds))


@pytest.mark.parametrize("name", list(MODEL_REGISTRY))
def test_save_and_load_any(tmp_path, name):
    ds = _blobs(n=15)
    settings = None
    if name == "transformer":
        settings = model_class(name).Settings(d_model=4, n_heads=2, n_layers=1, d_ff=8, epochs=1)
    model = build_model(name, settings).fit(ds, seed=1)
    back = load_any(model.save(tmp_path / f"{name}.fbm"))
    assert type(back) is type(model)
    assert back.hyperparameters() == model.hyperparameters()
    np.testing.assert_array_equal(back.score_dataset(ds), model.score_dataset(ds))


def test_load_any_rejects_unknown_magic(tmp_path):
    path = tmp_path / "x.fbm"
    path.write_bytes(b"ZZZZ0000")
    with pytest.raises(ModelFormatError, match="bad magic"):
        load_any(path)
    with pytest.raises(ModelFormatError, match="not found"):
        load_any(tmp_path / "missing.fbm")


def test_scoring_checks_columns():
    ds = _blobs(n=5)
    model = KNearestNeighbors(KnnSettings(k=1)).fit(ds)
    with pytest.raises(ShapeError):
        model.score_batch(np.ones((2, 3)))
    with pytest.raises(TrainingError):
        KNearestNeighbors().score_batch(np.ones((1, 2)))


def test_auc_is_invariant_to_monotone_score_transform():
    ds = _blobs(n=40)
    model = LogisticRegression(LogisticSettings(epochs=5)).fit(ds)
    scores = model.score_dataset(ds)
    assert roc_auc(scores, ds.labels) == roc_auc(2.0 * scores + 7.0, ds.labels)


def test_attached_scaler_is_saved_with_the_model(tmp_path):
    raw = _blobs(n=30)
    raw = raw.with_features(raw.features * 50.0 + 1000.0)
    scaler = fit_standardizer(raw)
    model = KNearestNeighbors(KnnSettings(k=3)).fit(scaler.transform(raw)).attach_scaler(scaler)
    # Check raw rows score exactly as pre-scaled rows did before attaching
    expected = KNearestNeighbors(KnnSettings(k=3)).fit(scaler.transform(raw)).score_dataset(scaler.transform(raw))
    np.testing.assert_array_equal(model.score_dataset(raw), expected)
    back = load_any(model.save(tmp_path / "knn.fbm"))
    np.testing.assert_array_equal(back.input_scaler.mean, scaler.mean)
    np.testing.assert_array_equal(back.input_scaler.scale, scaler.scale)
    np.testing.assert_array_equal(back.score_dataset(raw), expected)


def test_model_without_scaler_loads_without_one(tmp_path):
    ds = _blobs(n=10)
    back = load_any(LogisticRegression(LogisticSettings(epochs=5)).fit(ds).save(tmp_path / "lr.fbm"))
    assert back.input_scaler is None


def test_attach_scaler_checks_columns():
    ds = _blobs(n=10)
    model = KNearestNeighbors().fit(ds)
    other = fit_standardizer(make_dataset(ds.features, ds.labels, columns=["p", "q"]))
    with pytest.raises(ShapeError):
        model.attach_scaler(other)
    with pytest.raises(TrainingError):
        KNearestNeighbors().attach_scaler(fit_standardizer(ds))


def test_refit_drops_the_scaler():
    ds = _blobs(n=10)
    model = KNearestNeighbors().fit(ds).attach_scaler(fit_standardizer(ds))
    assert model.fit(ds).input_scaler is None
