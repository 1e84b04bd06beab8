"""
Classifiers over encoded documents.

``wrnn``      LSTM states pooled by one trainable scalar per position, then a
              ReLU hidden layer and softmax.
``rnn_last``  the final LSTM state fed to the same head.
``birnn``     forward and reverse LSTMs with separate weights; the two final
              states are concatenated.
``dnn``       mean of the non-padding word vectors through two ReLU layers.

All forward functions accept one document ``(SL,)`` or a batch ``(B, SL)`` of
ids and return ``(probs, cache)``.  ``model_backward`` turns a cache into
gradients of the batch-mean cross-entropy for every trainable parameter.
Parameters live in a flat ``dict`` keyed by names such as ``"lstm.W_f"`` or
``"head.W_out"``; ``forward``/``backward`` work directly on that dict.
"""

from dataclasses import asdict, dataclass, field

import numpy as np

from . import numerics
from .embeddings import EmbeddingMatrix, lookup, lookup_backward
from .errors import ShapeError
from .lstm import LstmParams, unroll_backward, unroll_forward
from .corpus import PAD_ID

KINDS = ("wrnn", "rnn_last", "birnn", "dnn")
POOL_MODES = ("none", "softmax")


@dataclass
class ModelSpec:
    kind: str = "wrnn"
    seq_len: int = 300
    vocab_size: int = 2
    embed_dim: int = 200
    lstm_hidden: int = 128
    hidden: int = 128
    n_classes: int = 20
    candidate: str = "tanh"
    pool_norm: str = "none"
    freeze_embeddings: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.pool_norm not in POOL_MODES:
            raise ValueError(f"unknown pooling mode {self.pool_norm!r}")
        if self.candidate not in ("tanh", "sigmoid"):
            raise ValueError(f"unknown candidate activation {self.candidate!r}")
        for name in ("seq_len", "embed_dim", "lstm_hidden", "hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_classes < 2 or self.vocab_size < 2:
            raise ValueError("need at least 2 classes and a vocabulary with the reserved ids")

    @property
    def head_input(self):
        if self.kind == "dnn":
            return self.embed_dim
        if self.kind == "birnn":
            return 2 * self.lstm_hidden
        return self.lstm_hidden

    @property
    def head_layers(self):
        return 2 if self.kind == "dnn" else 1

    def to_dict(self):
        return asdict(self)


@dataclass
class ClassifierHead:
    """Dense ReLU layers followed by a linear output layer."""

    weights: list
    biases: list

    def __post_init__(self):
        for prev, W in zip(self.weights, self.weights[1:]):
            if W.shape[1] != prev.shape[0]:
                raise ShapeError("classifier layer shapes do not chain")
        for W, b in zip(self.weights, self.biases):
            if b.shape != (W.shape[0],):
                raise ShapeError("classifier bias length must match its layer")

    @property
    def d_in(self):
        return self.weights[0].shape[1]

    @property
    def names(self):
        n = len(self.weights)
        return [(f"head.W_{i + 1}", f"head.b_{i + 1}") for i in range(n - 1)] + [("head.W_out", "head.b_out")]

    def as_dict(self):
        out = {}
        for (wn, bn), W, b in zip(self.names, self.weights, self.biases):
            out[wn], out[bn] = W, b
        return out

    @classmethod
    def from_dict(cls, d):
        n = sum(1 for k in d if k.startswith("head.W_") and k != "head.W_out")
        ws = [d[f"head.W_{i + 1}"] for i in range(n)] + [d["head.W_out"]]
        bs = [d[f"head.b_{i + 1}"] for i in range(n)] + [d["head.b_out"]]
        return cls(ws, bs)


def head_forward(x, head):
    if x.shape[1] != head.d_in:
        raise ShapeError(f"head expects {head.d_in} inputs, got {x.shape[1]}")
    acts = [x]
    a = x
    last = len(head.weights) - 1
    for i, (W, b) in enumerate(zip(head.weights, head.biases)):
        z = numerics.matmul(a, W.T) + b
        a = z if i == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts


def head_backward(dlogits, acts, head):
    """Returns ``(dx, dWs, dbs)``; ``acts`` as produced by ``head_forward``."""
    dWs, dbs = [], []
    dz = dlogits
    for i in range(len(head.weights) - 1, -1, -1):
        W = head.weights[i]
        dWs.append(numerics.matmul(dz.T, acts[i]))
        dbs.append(dz.sum(axis=0))
        da = numerics.matmul(dz, W)
        if i > 0:
            dz = da * (acts[i] > 0)
        else:
            dz = da
    return dz, dWs[::-1], dbs[::-1]


@dataclass
class ModelCache:
    kind: str
    ids: np.ndarray
    batched: bool
    vocab_size: int
    head: ClassifierHead
    acts: list
    probs: np.ndarray
    X: np.ndarray = None
    lstm: dict = field(default_factory=dict)
    lstm_caches: dict = field(default_factory=dict)
    weights: np.ndarray = None      # raw position weights
    alpha: np.ndarray = None        # effective pooling coefficients
    pool_norm: str = "none"
    H: np.ndarray = None
    n_tokens: np.ndarray = None


def _table(embeddings):
    return embeddings.table if isinstance(embeddings, EmbeddingMatrix) else embeddings


def _batch(ids):
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        return ids[None, :], False
    if ids.ndim != 2:
        raise ShapeError(f"ids must be (SL,) or (B, SL), got shape {ids.shape}")
    return ids, True


def _finish(kind, ids, batched, table, head, pooled, **extra):
    acts = head_forward(pooled, head)
    probs = numerics.softmax(acts[-1])
    cache = ModelCache(kind=kind, ids=ids, batched=batched, vocab_size=table.shape[0],
                       head=head, acts=acts, probs=probs, **extra)
    return (probs if batched else probs[0]), cache


def pooling_coefficients(w, mode="none"):
    w = np.asarray(w, dtype=np.float64)
    return numerics.softmax(w) if mode == "softmax" else w


def weighted_sum(H, w, mode="none"):
    """Sum of hidden-state rows scaled by position weights.

    ``H`` is ``(SL, hidden)`` or ``(B, SL, hidden)``; ``mode="softmax"``
    normalises the weights first.
    """
    H = np.asarray(H, dtype=np.float64)
    a = pooling_coefficients(w, mode)
    if a.shape != (H.shape[-2],):
        raise ShapeError(f"{a.shape[0]} position weights for {H.shape[-2]} positions")
    return np.einsum("t,...th->...h", a, H)


def wrnn_forward(ids, embeddings, lstm_params, w, head, candidate="tanh", pool_norm="none"):
    ids, batched = _batch(ids)
    table = _table(embeddings)
    X = lookup(ids, table)
    H, lc = unroll_forward(X, lstm_params, candidate=candidate)
    alpha = pooling_coefficients(w, pool_norm)
    pooled = weighted_sum(H, w, pool_norm)
    return _finish("wrnn", ids, batched, table, head, pooled, X=X,
                   lstm={"lstm.": lstm_params}, lstm_caches={"lstm.": lc},
                   weights=np.asarray(w), alpha=alpha, pool_norm=pool_norm, H=H)


def rnn_last_forward(ids, embeddings, lstm_params, head, candidate="tanh"):
    ids, batched = _batch(ids)
    table = _table(embeddings)
    X = lookup(ids, table)
    H, lc = unroll_forward(X, lstm_params, candidate=candidate)
    return _finish("rnn_last", ids, batched, table, head, H[:, -1, :], X=X,
                   lstm={"lstm.": lstm_params}, lstm_caches={"lstm.": lc}, H=H)


def birnn_forward(ids, embeddings, fwd_params, bwd_params, head, candidate="tanh"):
    ids, batched = _batch(ids)
    table = _table(embeddings)
    X = lookup(ids, table)
    Hf, cf = unroll_forward(X, fwd_params, "forward", candidate=candidate)
    Hb, cb = unroll_forward(X, bwd_params, "reverse", candidate=candidate)
    pooled = np.concatenate([Hf[:, -1, :], Hb[:, 0, :]], axis=1)
    return _finish("birnn", ids, batched, table, head, pooled, X=X,
                   lstm={"lstm_fwd.": fwd_params, "lstm_bwd.": bwd_params},
                   lstm_caches={"lstm_fwd.": cf, "lstm_bwd.": cb})


def dnn_forward(ids, embeddings, head):
    ids, batched = _batch(ids)
    table = _table(embeddings)
    X = lookup(ids, table)
    n = (ids != PAD_ID).sum(axis=1)
    pooled = X.sum(axis=1) / np.maximum(n, 1)[:, None]
    return _finish("dnn", ids, batched, table, head, pooled, X=X, n_tokens=n)


def model_backward(kind, cache, target, trainable_embeddings=True):
    """Gradients of the batch-mean cross-entropy.

    ``target`` holds the class labels, or (as a float array shaped like the
    probabilities) an upstream gradient dLoss/dprobs.
    """
    if cache.kind != kind:
        raise ShapeError(f"cache from a {cache.kind!r} forward passed to {kind!r} backward")
    probs = cache.probs
    target = np.asarray(target)
    nb = probs.shape[0]
    if not cache.batched:
        target = target.reshape(1, -1) if np.issubdtype(target.dtype, np.floating) else target.reshape(1)
    if np.issubdtype(target.dtype, np.integer):
        labels = target.reshape(nb)
        if labels.min() < 0 or labels.max() >= probs.shape[1]:
            raise ValueError("label out of range")
        dlogits = probs.copy()
        dlogits[np.arange(nb), labels] -= 1.0
        dlogits /= nb
    else:
        dprobs = target.reshape(probs.shape)
        dlogits = probs * (dprobs - (probs * dprobs).sum(axis=1, keepdims=True))

    grads = {}
    dpooled, dWs, dbs = head_backward(dlogits, cache.acts, cache.head)
    for (wn, bn), dW, db in zip(cache.head.names, dWs, dbs):
        grads[wn], grads[bn] = dW, db

    T = cache.ids.shape[1]
    if kind == "dnn":
        mask = (cache.ids != PAD_ID).astype(np.float64)
        scale = mask / np.maximum(cache.n_tokens, 1)[:, None]
        dX = scale[:, :, None] * dpooled[:, None, :]
    else:
        if kind == "wrnn":
            lc = cache.lstm_caches["lstm."]
            dalpha = np.einsum("bh,bth->t", dpooled, cache.H)
            dH = cache.alpha[None, :, None] * dpooled[:, None, :]
            if cache.pool_norm == "softmax":
                a = cache.alpha
                grads["pool.w"] = a * (dalpha - np.dot(a, dalpha))
            else:
                grads["pool.w"] = dalpha
            dX, dl = unroll_backward(dH, lc, cache.lstm["lstm."])
            grads.update(dl.as_dict("lstm."))
        elif kind == "rnn_last":
            lc = cache.lstm_caches["lstm."]
            dH = np.zeros_like(lc.H)
            dH[:, -1, :] = dpooled
            dX, dl = unroll_backward(dH, lc, cache.lstm["lstm."])
            grads.update(dl.as_dict("lstm."))
        else:
            hid = cache.lstm["lstm_fwd."].hidden
            cf, cb = cache.lstm_caches["lstm_fwd."], cache.lstm_caches["lstm_bwd."]
            dHf = np.zeros_like(cf.H)
            dHf[:, T - 1, :] = dpooled[:, :hid]
            dHb = np.zeros_like(cb.H)
            dHb[:, 0, :] = dpooled[:, hid:]
            dXf, dlf = unroll_backward(dHf, cf, cache.lstm["lstm_fwd."])
            dXb, dlb = unroll_backward(dHb, cb, cache.lstm["lstm_bwd."])
            dX = dXf + dXb
            grads.update(dlf.as_dict("lstm_fwd."))
            grads.update(dlb.as_dict("lstm_bwd."))
    if trainable_embeddings:
        grads["embedding"] = lookup_backward(cache.ids, dX, cache.vocab_size)
    return grads


# ---------------------------------------------------------------- dict-level API


def init_params(spec, rng, embeddings=None):
    """Fresh parameters; ``embeddings`` (table) replaces the random table."""
    p = {}
    if embeddings is not None:
        table = np.array(_table(embeddings), dtype=np.float64)
        if table.shape != (spec.vocab_size, spec.embed_dim):
            raise ShapeError(f"embedding table {table.shape} does not match "
                             f"({spec.vocab_size}, {spec.embed_dim})")
    else:
        table = numerics.init_matrix(spec.vocab_size, spec.embed_dim, "xavier_uniform", rng)
    table[PAD_ID] = 0.0
    p["embedding"] = table
    if spec.kind in ("wrnn", "rnn_last"):
        p.update(LstmParams.init(spec.lstm_hidden, spec.embed_dim, rng).as_dict("lstm."))
    elif spec.kind == "birnn":
        p.update(LstmParams.init(spec.lstm_hidden, spec.embed_dim, rng).as_dict("lstm_fwd."))
        p.update(LstmParams.init(spec.lstm_hidden, spec.embed_dim, rng).as_dict("lstm_bwd."))
    if spec.kind == "wrnn":
        p["pool.w"] = np.full(spec.seq_len, 1.0 / spec.seq_len)
    d_in = spec.head_input
    ws, bs = [], []
    for _ in range(spec.head_layers):
        ws.append(numerics.init_matrix(spec.hidden, d_in, "xavier_uniform", rng))
        bs.append(np.zeros(spec.hidden))
        d_in = spec.hidden
    ws.append(numerics.init_matrix(spec.n_classes, d_in, "xavier_uniform", rng))
    bs.append(np.zeros(spec.n_classes))
    p.update(ClassifierHead(ws, bs).as_dict())
    return p


def expected_shapes(spec):
    rng = numerics.make_rng(0)
    return {k: v.shape for k, v in init_params(spec, rng).items()}


def trainable_names(spec, params):
    return [k for k in params if not (k == "embedding" and spec.freeze_embeddings)]


def forward(spec, params, ids):
    head = ClassifierHead.from_dict(params)
    table = params["embedding"]
    if spec.kind == "wrnn":
        return wrnn_forward(ids, table, LstmParams.from_dict(params, "lstm."), params["pool.w"],
                            head, spec.candidate, spec.pool_norm)
    if spec.kind == "rnn_last":
        return rnn_last_forward(ids, table, LstmParams.from_dict(params, "lstm."), head, spec.candidate)
    if spec.kind == "birnn":
        return birnn_forward(ids, table, LstmParams.from_dict(params, "lstm_fwd."),
                             LstmParams.from_dict(params, "lstm_bwd."), head, spec.candidate)
    return dnn_forward(ids, table, head)


def backward(spec, cache, target):
    return model_backward(spec.kind, cache, target, trainable_embeddings=not spec.freeze_embeddings)


def predict_proba(spec, params, ids, batch_size=256):
    ids = np.asarray(ids, dtype=np.int64)
    out = [forward(spec, params, ids[i:i + batch_size])[0] for i in range(0, len(ids), batch_size)]
    return np.concatenate(out, axis=0) if out else np.zeros((0, spec.n_classes))
