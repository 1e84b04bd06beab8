import math

import numpy as np
import pytest

from wrnn import models, numerics, synthetic, training
from wrnn.corpus import build_vocabulary, encode_document
from wrnn.errors import DataError, NumericalError, ShapeError
from wrnn.training import AdamState, TrainConfig


def test_cross_entropy_examples():
    assert abs(training.cross_entropy(np.full(4, 0.25), 2) - math.log(4)) < 1e-15
    assert training.cross_entropy(np.array([0.0, 1.0]), 1) == 0.0
    assert abs(training.cross_entropy(np.full(20, 0.05), 0) - 2.9957) < 1e-4
    assert training.cross_entropy(np.array([1.0, 0.0]), 1) == pytest.approx(-math.log(1e-12))
    with pytest.raises(ValueError):
        training.cross_entropy(np.full(3, 1 / 3), 3)


def test_l2_penalty_examples():
    assert training.l2_penalty({"head.W_1": np.array([[3.0, 4.0]])}, 0.01) == pytest.approx(0.125)
    assert training.l2_penalty({"head.W_1": np.ones((2, 2))}, 0.0) == 0.0
    excluded = {"embedding": np.ones(3), "pool.w": np.ones(3), "lstm.b_f": np.ones(3), "head.b_out": np.ones(2)}
    assert training.l2_penalty(excluded, 0.5) == 0.0


def test_l2_gradient_vs_fd(rng):
    p = {"lstm.W_f": rng.normal(size=(3, 4)), "head.W_out": rng.normal(size=(2, 3)), "lstm.b_f": rng.normal(size=3)}
    g = training.add_l2_grad({k: np.zeros_like(v) for k, v in p.items()}, p, 0.01)
    for name, arr in p.items():
        num = numerics.finite_diff_grad(lambda _: training.l2_penalty(p, 0.01), arr)
        if name == "lstm.b_f":
            assert not g[name].any() and not num.any()
        else:
            assert numerics.relative_error(g[name], num) < 1e-5


def test_adam_hand_values():
    cfg = TrainConfig()
    p, st = {"x": np.zeros(1)}, AdamState()
    training.adam_step(p, {"x": np.ones(1)}, st, cfg)
    assert abs(p["x"][0] + 0.01) < 1e-9 and st.t == 1
    training.adam_step(p, {"x": np.ones(1)}, st, cfg)
    assert abs(p["x"][0] + 0.02) < 1e-9


def test_adam_zero_gradient_is_exact_noop(rng):
    p = {"a": rng.normal(size=(3, 2))}
    before = p["a"].copy()
    training.adam_step(p, {"a": np.zeros((3, 2))}, AdamState(), TrainConfig())
    assert np.array_equal(p["a"], before)


def test_adam_shape_mismatch():
    with pytest.raises(ShapeError):
        training.adam_step({"a": np.zeros(3)}, {"a": np.zeros(4)}, AdamState(), TrainConfig())


def test_clip_gradients():
    g = {"a": np.array([6.0, 8.0])}
    c = training.clip_gradients(g, 5.0)
    np.testing.assert_allclose(c["a"], [3, 4])
    assert training.global_norm(c) == pytest.approx(5)
    assert training.clip_gradients(g, 0) is g
    small = {"a": np.array([0.0, 3.0])}
    assert training.clip_gradients(small, 5.0)["a"].tolist() == [0, 3]


def test_config_validation():
    for bad in (dict(lr=0), dict(batch_size=0), dict(l2=-1), dict(beta1=1.0), dict(beta2=0)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_objective_is_ce_plus_l2(rng):
    s = models.ModelSpec(kind="wrnn", seq_len=3, vocab_size=6, embed_dim=2, lstm_hidden=2, hidden=3, n_classes=2)
    p = models.init_params(s, rng)
    ids, labels = np.array([[2, 3, 0], [4, 5, 1]]), np.array([0, 1])
    loss, _ = training.objective(s, p, ids, labels, 0.01)
    probs, _ = models.forward(s, p, ids)
    ce = np.mean([training.cross_entropy(probs[i], labels[i]) for i in range(2)])
    assert loss == pytest.approx(ce + training.l2_penalty(p, 0.01), abs=1e-15)


def marker_data(n_docs=200, length=20, seed=1):
    docs = synthetic.marker_corpus(n_docs, length, seed=seed)
    vocab = build_vocabulary(docs, min_count=1)
    ids = np.array([encode_document(d, vocab, length) for d in docs])
    return ids, np.array([d.label for d in docs]), len(vocab)


def small_spec(kind, V, sl=20, width=16):
    return models.ModelSpec(kind=kind, seq_len=sl, vocab_size=V, embed_dim=width, lstm_hidden=width,
                            hidden=width, n_classes=2)


def test_marker_corpus_is_separable():
    ids, labels, V = marker_data()
    assert set(labels.tolist()) == {0, 1} and ids.shape == (200, 20)


def test_epochs_zero_returns_initial(rng):
    ids, labels, V = marker_data(40)
    s = small_spec("dnn", V)
    p = models.init_params(s, rng)
    res = training.train(s, p, ids, labels, TrainConfig(epochs=0))
    assert len(res.history) == 0
    assert all(np.array_equal(res.params[k], p[k]) for k in p)


def test_empty_training_set(rng):
    s = small_spec("dnn", 10)
    with pytest.raises(DataError):
        training.train(s, models.init_params(s, rng), np.zeros((0, 20), dtype=int), np.zeros(0, dtype=int),
                       TrainConfig())


def test_non_finite_loss_is_reported(rng):
    ids, labels, V = marker_data(40)
    s = small_spec("dnn", V)
    p = models.init_params(s, rng)
    p["head.b_out"][:] = np.nan
    with pytest.raises(NumericalError, match="batch 0.*head.W_out"):
        training.train(s, p, ids, labels, TrainConfig(epochs=1))


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_objective_non_increasing_first_epochs(seed):
    ids, labels, V = marker_data()
    s = small_spec("wrnn", V)
    p = models.init_params(s, numerics.make_rng(seed, "init"))
    res = training.train(s, p, ids, labels, TrainConfig(epochs=3, batch_size=32, seed=seed))
    objs = [r.train_objective for r in res.history.rows]
    assert all(b <= a for a, b in zip(objs, objs[1:])), objs


def test_training_deterministic(tmp_path):
    ids, labels, V = marker_data(60)
    s = small_spec("wrnn", V)
    runs = []
    for k in range(2):
        p = models.init_params(s, numerics.make_rng(7, "init"))
        res = training.train(s, p, ids[:50], labels[:50], TrainConfig(epochs=3, batch_size=16, seed=7,
                                                                       deterministic=True),
                             ids[50:], labels[50:])
        res.history.write_csv(tmp_path / f"h{k}.csv")
        runs.append(res)
    for k in runs[0].params:
        assert runs[0].params[k].tobytes() == runs[1].params[k].tobytes()
    assert (tmp_path / "h0.csv").read_bytes() == (tmp_path / "h1.csv").read_bytes()


def test_best_checkpoint_and_history(rng, tmp_path):
    ids, labels, V = marker_data(80)
    s = small_spec("dnn", V)
    seen = []
    res = training.train(s, models.init_params(s, rng), ids[:60], labels[:60],
                         TrainConfig(epochs=4, batch_size=16), ids[60:], labels[60:],
                         on_epoch=lambda row, p: seen.append(row.test_accuracy))
    assert len(res.history) == 4 and len(seen) == 4
    assert 1 <= res.best_epoch <= 4
    assert seen[res.best_epoch - 1] == max(seen)
    _, acc, _, _ = training.evaluate(s, res.best_params, ids[60:], labels[60:])
    assert acc == max(seen)
    res.history.write_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "epoch,split,loss,accuracy" and len(lines) == 9
    assert lines[1].startswith("1,train,") and lines[2].startswith("1,test,")


def test_frozen_embeddings_stay_fixed(rng):
    ids, labels, V = marker_data(40)
    s = models.ModelSpec(kind="wrnn", seq_len=20, vocab_size=V, embed_dim=8, lstm_hidden=8, hidden=8,
                         n_classes=2, freeze_embeddings=True)
    p = models.init_params(s, rng)
    res = training.train(s, p, ids, labels, TrainConfig(epochs=2, batch_size=16))
    assert np.array_equal(res.params["embedding"], p["embedding"])
    assert not np.array_equal(res.params["lstm.W_f"], p["lstm.W_f"])


def test_pad_row_stays_zero(rng):
    ids, labels, V = marker_data(40)
    s = small_spec("wrnn", V)
    res = training.train(s, models.init_params(s, rng), ids, labels, TrainConfig(epochs=2, batch_size=8))
    assert not res.params["embedding"][0].any()


@pytest.mark.parametrize("kind", ["wrnn", "rnn_last", "dnn", "birnn"])
def test_synthetic_separability(kind):
    ids, labels, V = marker_data()
    s = small_spec(kind, V)
    res = training.train(s, models.init_params(s, numerics.make_rng(1, "init")), ids, labels,
                         TrainConfig(epochs=50, batch_size=32, seed=1))
    _, acc, _, _ = training.evaluate(s, res.params, ids, labels)
    assert acc >= 0.99
