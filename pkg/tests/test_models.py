import numpy as np
import pytest

from conftest import toy_params, toy_spec
from oracles import TOY, toy_trace
from wrnn import models, numerics
from wrnn.errors import ShapeError


def spec(kind, **kw):
    base = dict(kind=kind, seq_len=4, vocab_size=9, embed_dim=2, lstm_hidden=3, hidden=5, n_classes=2)
    base.update(kw)
    return models.ModelSpec(**base)


def perturbed(s, rng, scale=0.5):
    p = models.init_params(s, rng)
    for k in p:
        p[k] = p[k] + rng.normal(0, scale, p[k].shape)
    p["embedding"][0] = 0
    return p


IDS = np.array([[3, 4, 5, 0], [8, 1, 2, 2], [6, 0, 0, 0]])
LABELS = np.array([1, 0, 1])


@pytest.mark.parametrize("candidate", ["tanh", "sigmoid"])
def test_toy_forward_matches_hand_trace(candidate):
    trace = toy_trace(candidate)
    probs, cache = models.forward(toy_spec(candidate), toy_params(), np.array(TOY["ids"]))
    np.testing.assert_allclose(cache.H[0], trace["H"], rtol=0, atol=1e-10)
    np.testing.assert_allclose(cache.acts[1][0], trace["hidden"], rtol=0, atol=1e-10)
    np.testing.assert_allclose(probs, trace["probs"], rtol=0, atol=1e-10)


def test_weighted_sum_examples():
    H = np.array([[1.0, 2], [3, 4]])
    assert models.weighted_sum(H, np.ones(2)).tolist() == [4, 6]
    assert not models.weighted_sum(H, np.zeros(2)).any()
    assert np.array_equal(models.weighted_sum(H, np.array([0.0, 1.0])), H[-1])
    with pytest.raises(ShapeError):
        models.weighted_sum(H, np.ones(3))


def test_softmax_pooling_normalises(rng):
    H = rng.normal(size=(5, 3))
    w = rng.normal(size=5)
    a = numerics.softmax(w)
    np.testing.assert_allclose(models.weighted_sum(H, w, "softmax"), a @ H, atol=1e-14)


@pytest.mark.parametrize("kind", models.KINDS)
def test_outputs_are_distributions(kind, rng):
    s = spec(kind)
    probs, _ = models.forward(s, perturbed(s, rng), IDS)
    assert probs.shape == (3, 2) and np.all(probs >= 0)
    np.testing.assert_allclose(probs.sum(axis=1), 1, rtol=0, atol=1e-12)


@pytest.mark.parametrize("candidate", ["tanh", "sigmoid"])
def test_one_hot_last_reduces_to_rnn_last(candidate, rng):
    sw, sr = spec("wrnn", candidate=candidate), spec("rnn_last", candidate=candidate)
    p = perturbed(sw, rng)
    p["pool.w"] = np.zeros(4)
    p["pool.w"][-1] = 1.0
    pr = {k: v for k, v in p.items() if k != "pool.w"}
    a, _ = models.forward(sw, p, IDS)
    b, _ = models.forward(sr, pr, IDS)
    assert np.array_equal(a, b)


def test_rnn_last_locality_when_sl_is_one(rng):
    s = spec("rnn_last", seq_len=1)
    p = perturbed(s, rng)
    ids = np.array([[4], [7]])
    before, _ = models.forward(s, p, ids)
    q = dict(p)
    emb = p["embedding"].copy()
    emb[[2, 3, 5, 6, 8]] = emb[[8, 6, 5, 3, 2]]      # shuffle rows the documents never use
    q["embedding"] = emb
    after, _ = models.forward(s, q, ids)
    assert np.array_equal(before, after)


def test_birnn_palindrome_symmetry(rng):
    s = spec("birnn", seq_len=5)
    p = perturbed(s, rng)
    for n in ("W_f", "W_g", "W_c", "W_o", "b_f", "b_g", "b_c", "b_o"):
        p["lstm_bwd." + n] = p["lstm_fwd." + n].copy()
    _, cache = models.forward(s, p, np.array([3, 5, 7, 5, 3]))
    pooled = cache.acts[0][0]
    np.testing.assert_allclose(pooled[:3], pooled[3:], atol=1e-15)


def test_birnn_zero_params_uniform():
    s = spec("birnn", n_classes=4)
    p = {k: np.zeros_like(v) for k, v in models.init_params(s, numerics.make_rng(0)).items()}
    probs, _ = models.forward(s, p, IDS)
    np.testing.assert_allclose(probs, 0.25, atol=1e-15)


def test_dnn_all_pad_depends_on_biases_only(rng):
    s = spec("dnn")
    p = perturbed(s, rng)
    _, cache = models.forward(s, p, np.zeros(4, dtype=int))
    assert not cache.acts[0].any()
    b1 = np.maximum(p["head.b_1"], 0)
    b2 = np.maximum(p["head.W_2"] @ b1 + p["head.b_2"], 0)
    np.testing.assert_allclose(cache.acts[-1][0], p["head.W_out"] @ b2 + p["head.b_out"], atol=1e-14)


def test_dnn_is_order_free_but_wrnn_is_not(rng):
    ids = np.array([3, 4, 5, 6])
    perm = np.array([6, 3, 5, 4])
    sd = spec("dnn")
    pd = perturbed(sd, rng)
    np.testing.assert_allclose(models.forward(sd, pd, ids)[0], models.forward(sd, pd, perm)[0], atol=1e-14)
    sw = spec("wrnn")
    pw = perturbed(sw, rng)
    la = models.forward(sw, pw, ids)[1].acts[-1]
    lb = models.forward(sw, pw, perm)[1].acts[-1]
    assert np.max(np.abs(la - lb)) > 1e-6


def _relu_safe(s, rng):
    # keep every hidden ReLU input clear of the kink so finite differences are valid
    while True:
        p = perturbed(s, rng)
        _, c = models.forward(s, p, IDS)
        head = c.head
        z = [numerics.matmul(c.acts[i], head.weights[i].T) + head.biases[i]
             for i in range(len(head.weights) - 1)]
        if min(np.abs(v).min() for v in z) > 1e-3:
            return p


@pytest.mark.parametrize("kind", models.KINDS)
@pytest.mark.parametrize("candidate", ["tanh", "sigmoid"])
def test_model_backward_vs_fd(kind, candidate, rng):
    s = spec(kind, candidate=candidate, embed_dim=2, lstm_hidden=3, hidden=3)
    p = _relu_safe(s, rng)
    _, cache = models.forward(s, p, IDS)
    grads = models.backward(s, cache, LABELS)
    assert set(grads) == set(p)

    def loss(_=None):
        probs, _c = models.forward(s, p, IDS)
        return float(np.mean(-np.log(probs[np.arange(3), LABELS])))

    for name, arr in p.items():
        err = numerics.relative_error(grads[name], numerics.finite_diff_grad(loss, arr))
        assert err < 1e-5, (name, err)


def test_upstream_probability_gradient(rng):
    s = spec("wrnn")
    p = _relu_safe(s, rng)
    dprobs = rng.normal(size=(3, 2))
    _, cache = models.forward(s, p, IDS)
    grads = models.backward(s, cache, dprobs)

    def loss(_=None):
        return float(np.sum(dprobs * models.forward(s, p, IDS)[0]))

    for name in ("pool.w", "lstm.W_c", "head.W_out"):
        assert numerics.relative_error(grads[name], numerics.finite_diff_grad(loss, p[name])) < 1e-5


def test_pool_gradient_is_dot_with_hidden_states(rng):
    s = spec("wrnn")
    p = _relu_safe(s, rng)
    _, cache = models.forward(s, p, IDS)
    grads = models.backward(s, cache, LABELS)
    # recover dWD from the head and compare with sum_b <dWD_b, H_b,i>
    probs = cache.probs.copy()
    probs[np.arange(3), LABELS] -= 1
    dwd, _, _ = models.head_backward(probs / 3, cache.acts, cache.head)
    np.testing.assert_allclose(grads["pool.w"], np.einsum("bh,bth->t", dwd, cache.H), atol=1e-14)


def test_frozen_embeddings_emit_no_gradient(rng):
    s = spec("wrnn", freeze_embeddings=True)
    p = perturbed(s, rng)
    _, cache = models.forward(s, p, IDS)
    assert "embedding" not in models.backward(s, cache, LABELS)
    assert "embedding" not in models.trainable_names(s, p)


def test_backward_rejects_foreign_cache(rng):
    s = spec("dnn")
    _, cache = models.forward(s, perturbed(s, rng), IDS)
    with pytest.raises(ShapeError):
        models.model_backward("wrnn", cache, LABELS)


def test_spec_validation():
    with pytest.raises(ValueError):
        models.ModelSpec(kind="crnn")
    with pytest.raises(ValueError):
        models.ModelSpec(candidate="relu")
    with pytest.raises(ValueError):
        models.ModelSpec(n_classes=1)


def test_init_shapes():
    s = spec("wrnn", embed_dim=6, lstm_hidden=7, hidden=8, n_classes=3)
    shapes = models.expected_shapes(s)
    assert shapes["lstm.W_f"] == (7, 13) and shapes["pool.w"] == (4,)
    assert shapes["head.W_1"] == (8, 7) and shapes["head.W_out"] == (3, 8)
    p = models.init_params(s, numerics.make_rng(1))
    np.testing.assert_array_equal(p["pool.w"], 0.25)
    assert not p["embedding"][0].any()
    assert models.expected_shapes(spec("birnn", lstm_hidden=7))["head.W_1"] == (5, 14)
    assert "head.W_2" in models.expected_shapes(spec("dnn"))
