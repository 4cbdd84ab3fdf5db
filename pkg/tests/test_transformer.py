import numpy as np
import pytest

from fraudbench.base.training import TrainConfig
from fraudbench.data.preprocess import fit_standardizer
from fraudbench.data.synthetic import SyntheticKind, SyntheticSpec, generate_synthetic
from fraudbench.errors import ModelFormatError, ShapeError, TrainingError
from fraudbench.models.transformer import (
    TransformerClassifier,
    TransformerHyper,
    TransformerSettings,
    attention_weights,
    encoder_layer,
    forward,
    forward_batch,
    init_params,
    load_model,
    loss_and_grads,
    multi_head_attention,
    param_shapes,
    predict_proba,
    save_model,
    tokenize,
    train,
)
from fraudbench.numerics.gradcheck import grad_check
from fraudbench.numerics.rng import make_rng
from tests.helpers import make_dataset

TINY = TransformerHyper(d_model=4, n_heads=2, n_layers=1, d_ff=8, dropout_rate=0.0, max_tokens=3)


def _tiny_params(seed=0):
    params = init_params(TINY, make_rng(seed))
    # Non-trivial norms and biases so their gradients are exercised too
    rng = make_rng(seed + 100)
    for name in params:
        if name.endswith(("bias", ".b1", ".b2", ".gain")):
            params[name] = params[name] + rng.normal(0.0, 0.1, size=params[name].shape)
    return params


def test_param_shapes_in_declared_order():
    names = list(param_shapes(TINY))
    assert names[:3] == ["embed.weight", "embed.bias", "embed.identity"]
    assert names[-2:] == ["head.weight", "head.bias"]
    assert param_shapes(TINY)["layers.0.ffn.w1"] == (4, 8)


def test_heads_must_divide_width():
    with pytest.raises(ValueError):
        TransformerHyper(d_model=5, n_heads=2, max_tokens=3)
    with pytest.raises(ValueError):
        TransformerSettings(d_model=6, n_heads=4)


def test_gradients_match_central_differences():
    rows = make_rng(1).normal(size=(2, 3))
    labels = np.array([0, 1])

    def f(p):
        return loss_and_grads(p, rows, labels, TINY, training=False)

    report = grad_check(f, _tiny_params())
    assert report.max_relative_error < 1e-3, f"{report.worst_parameter}{report.worst_index}"


def test_attention_rows_are_stochastic():
    params = _tiny_params()
    x = tokenize(make_rng(2).normal(size=(5, 3)), params)
    attn = attention_weights(x, params, 0, TINY.n_heads)
    assert attn.shape == (5, 2, 3, 3)
    np.testing.assert_allclose(attn.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(attn >= 0.0)


def test_single_token_attends_to_itself():
    hyper = TransformerHyper(d_model=4, n_heads=2, n_layers=1, d_ff=8, dropout_rate=0.0, max_tokens=1)
    params = init_params(hyper, make_rng(0))
    x = tokenize(np.array([0.7]), params)
    attn = attention_weights(x, params, 0, hyper.n_heads)
    np.testing.assert_allclose(attn, 1.0)
    # Output is then V projected through W_O
    expected = x @ params["layers.0.w_v"] @ params["layers.0.w_o"]
    np.testing.assert_allclose(multi_head_attention(x, params, 0, hyper.n_heads), expected, atol=1e-12)


def test_identical_tokens_attend_uniformly():
    params = _tiny_params()
    x = np.tile(make_rng(3).normal(size=(1, 4)), (3, 1))
    attn = attention_weights(x, params, 0, TINY.n_heads)
    np.testing.assert_allclose(attn, 1.0 / 3.0, atol=1e-12)


def test_tokenize_is_affine_in_the_row():
    params = _tiny_params()
    row = np.array([0.5, -1.0, 2.0])
    offset = params["embed.bias"] + params["embed.identity"]
    np.testing.assert_allclose(tokenize(3.0 * row, params) - offset, 3.0 * (tokenize(row, params) - offset), atol=1e-12)
    with pytest.raises(ShapeError):
        tokenize(np.ones(4), params)


def test_encoder_layer_is_permutation_equivariant():
    params = _tiny_params()
    x = make_rng(4).normal(size=(3, 4))
    perm = [2, 0, 1]
    np.testing.assert_allclose(
        encoder_layer(x[perm], params, 0, TINY), encoder_layer(x, params, 0, TINY)[perm], atol=1e-12
    )


def test_forward_is_a_distribution():
    params = _tiny_params()
    probs = forward(np.array([1.0, 2.0, 3.0]), params, TINY)
    assert probs.shape == (2,)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ShapeError):
        forward_batch(np.ones((2, 4)), params, TINY)


def test_predictions_are_row_independent():
    params = _tiny_params()
    rows = make_rng(5).normal(size=(600, 3))
    together = predict_proba(rows, params, TINY)
    alone = np.array([forward(r, params, TINY)[1] for r in rows[:5]])
    np.testing.assert_allclose(together[:5], alone, atol=1e-12)
    np.testing.assert_allclose(predict_proba(rows[::-1], params, TINY), together[::-1], atol=1e-12)


def test_feature_order_does_not_change_predictions():
    hyper = TransformerHyper(d_model=8, n_heads=2, n_layers=2, d_ff=16, dropout_rate=0.0, max_tokens=5)
    params = init_params(hyper, make_rng(13))
    rows = make_rng(14).normal(size=(7, 5))
    perm = [3, 0, 4, 2, 1]
    permuted = dict(params)
    for name in ("embed.weight", "embed.bias", "embed.identity"):
        permuted[name] = params[name][perm]
    np.testing.assert_allclose(
        forward_batch(rows[:, perm], permuted, hyper), forward_batch(rows, params, hyper), atol=1e-9
    )


def test_fresh_model_is_undecided():
    settings = TransformerSettings()
    hyper = settings.hyper(30)
    params = init_params(hyper, make_rng(0))
    rows = make_rng(1).normal(size=(100, 30))
    assert float(np.mean(np.abs(predict_proba(rows, params, hyper) - 0.5))) < 0.2


def test_forward_matches_torch():
    torch = pytest.importorskip("torch")
    F = torch.nn.functional
    hyper = TransformerHyper(d_model=8, n_heads=2, n_layers=2, d_ff=16, dropout_rate=0.0, max_tokens=5)
    params = init_params(hyper, make_rng(11))
    rows = make_rng(12).normal(size=(4, 5))
    t = {k: torch.tensor(v, dtype=torch.float64) for k, v in params.items()}

    x = torch.tensor(rows)[:, :, None] * t["embed.weight"] + t["embed.bias"] + t["embed.identity"]
    b, n, d = x.shape
    dk = d // hyper.n_heads
    for layer in range(hyper.n_layers):
        p = f"layers.{layer}"

        def heads(m):
            return m.reshape(b, n, hyper.n_heads, dk).transpose(1, 2)

        q, k, v = heads(x @ t[f"{p}.w_q"]), heads(x @ t[f"{p}.w_k"]), heads(x @ t[f"{p}.w_v"])
        attn = torch.softmax(q @ k.transpose(-1, -2) / dk**0.5, dim=-1)
        mha = (attn @ v).transpose(1, 2).reshape(b, n, d) @ t[f"{p}.w_o"]
        y = F.layer_norm(x + mha, (d,), t[f"{p}.ln1.gain"], t[f"{p}.ln1.bias"], eps=1e-5)
        ffn = torch.relu(y @ t[f"{p}.ffn.w1"] + t[f"{p}.ffn.b1"]) @ t[f"{p}.ffn.w2"] + t[f"{p}.ffn.b2"]
        x = F.layer_norm(y + ffn, (d,), t[f"{p}.ln2.gain"], t[f"{p}.ln2.bias"], eps=1e-5)
    logits = x.mean(dim=1) @ t["head.weight"] + t["head.bias"]
    expected = torch.softmax(logits, dim=-1).numpy()

    np.testing.assert_allclose(forward_batch(rows, params, hyper), expected, atol=1e-12)


def test_zero_learning_rate_leaves_params_unchanged():
    ds = make_dataset(make_rng(6).normal(size=(8, 3)), [0, 1] * 4)
    params, curve = train(ds, TINY, TrainConfig(epochs=3, batch_size=4, lr=0.0, seed=9))
    initial = init_params(TINY, make_rng(9))
    for name in initial:
        np.testing.assert_array_equal(params[name], initial[name])
    assert len(curve) == 3
    # Check the curve is flat: only the batch order changes between epochs
    assert max(curve) - min(curve) <= 1e-12


def test_training_is_deterministic_and_reduces_loss():
    rng = make_rng(7)
    features = rng.normal(size=(40, 3))
    labels = (features[:, 0] > 0).astype(np.int64)
    ds = make_dataset(features, labels)
    cfg = TrainConfig(epochs=40, batch_size=8, lr=1e-2, seed=1)
    a, curve = train(ds, TINY, cfg)
    b, _ = train(ds, TINY, cfg)
    for name in a:
        np.testing.assert_array_equal(a[name], b[name])
    assert curve[-1] < curve[0]


def test_blobs_loss_falls_and_settles():
    ds = generate_synthetic(SyntheticSpec(n_per_class=200, kind=SyntheticKind.GAUSSIAN_BLOBS, mu=3.0, seed=0))
    settings = TransformerSettings(epochs=20, dropout_rate=0.0)
    _, curve = train(ds, settings.hyper(ds.n_cols), settings.train_config(seed=0))
    assert len(curve) == 20
    assert curve[-1] < 0.1
    # Check no epoch after the third rises by more than 0.05
    assert all(later - earlier <= 0.05 for earlier, later in zip(curve[2:], curve[3:]))


def test_training_needs_both_classes():
    ds = make_dataset(np.ones((4, 3)), [0, 0, 0, 0])
    with pytest.raises(TrainingError):
        train(ds, TINY)


def test_dropout_is_seeded():
    hyper = TransformerHyper(d_model=4, n_heads=2, n_layers=1, d_ff=8, dropout_rate=0.5, max_tokens=3)
    params = init_params(hyper, make_rng(0))
    rows = make_rng(1).normal(size=(3, 3))
    a = forward_batch(rows, params, hyper, training=True, rng=make_rng(2))
    b = forward_batch(rows, params, hyper, training=True, rng=make_rng(2))
    np.testing.assert_array_equal(a, b)
    # Inference ignores dropout entirely
    np.testing.assert_array_equal(forward_batch(rows, params, hyper), forward_batch(rows, params, hyper))


def test_save_load_round_trip(tmp_path):
    params = _tiny_params()
    path = save_model(tmp_path / "m.fbm", TINY, params)
    hyper, loaded, _ = load_model(path)
    assert hyper == TINY
    rows = make_rng(8).normal(size=(6, 3))
    np.testing.assert_array_equal(predict_proba(rows, loaded, hyper), predict_proba(rows, params, TINY))


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "junk.fbm"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(ModelFormatError, match="magic"):
        load_model(path)


def test_load_names_mismatching_tensor(tmp_path):
    path = save_model(tmp_path / "m.fbm", TINY, _tiny_params())
    wider = TransformerHyper(d_model=4, n_heads=2, n_layers=1, d_ff=6, dropout_rate=0.0, max_tokens=3)
    with pytest.raises(ModelFormatError, match="layers.0.ffn.w1"):
        load_model(path, expected=wider)


def test_load_truncated_file(tmp_path):
    path = save_model(tmp_path / "m.fbm", TINY, _tiny_params())
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(ModelFormatError, match="truncated"):
        load_model(path)


def test_classifier_wrapper_round_trip(tmp_path):
    rng = make_rng(10)
    features = rng.normal(size=(20, 3))
    ds = make_dataset(features, (features[:, 1] > 0).astype(int))
    settings = TransformerSettings(d_model=4, n_heads=2, n_layers=1, d_ff=8, epochs=2, dropout_rate=0.0)
    model = TransformerClassifier(settings).fit(ds, seed=3)
    back = TransformerClassifier.load(model.save(tmp_path / "t.fbm"))
    assert back.columns == ds.columns
    np.testing.assert_array_equal(back.score_dataset(ds), model.score_dataset(ds))
    assert set(model.predict_batch(ds.features)) <= {0, 1}


def test_classifier_keeps_its_scaler_on_disk(tmp_path):
    rng = make_rng(15)
    features = rng.normal(loc=500.0, scale=40.0, size=(24, 3))
    raw = make_dataset(features, (features[:, 0] > 500.0).astype(int))
    scaler = fit_standardizer(raw)
    settings = TransformerSettings(d_model=4, n_heads=2, n_layers=1, d_ff=8, epochs=2, dropout_rate=0.0)
    model = TransformerClassifier(settings).fit(scaler.transform(raw), seed=1).attach_scaler(scaler)
    path = model.save(tmp_path / "t.fbm")
    back = TransformerClassifier.load(path)
    np.testing.assert_array_equal(back.input_scaler.scale, scaler.scale)
    np.testing.assert_array_equal(back.score_dataset(raw), model.score_dataset(raw))
    # Check the functional loader reads the same file, scaler tensors aside
    hyper, params, header = load_model(path)
    assert header["standardized"] is True
    np.testing.assert_array_equal(
        predict_proba(scaler.transform(raw), params, hyper), back.score_dataset(raw)
    )
