"""
LSTM cell and its unrolling over a sequence.

    f_t = sigmoid(W_f [h_{t-1}; x_t] + b_f)
    g_t = sigmoid(W_g [h_{t-1}; x_t] + b_g)
    c_t = act(W_c [h_{t-1}; x_t] + b_c)      act = tanh (default) or sigmoid
    s_t = f_t * s_{t-1} + g_t * c_t
    o_t = sigmoid(W_o [h_{t-1}; x_t] + b_o)
    h_t = o_t * tanh(s_t)

Sequences may be given as ``(T, D)`` or batched as ``(B, T, D)``.  Every
entry point goes through the same compiled kernel, so a one-step unroll and
``cell_forward`` agree bitwise.
"""

from dataclasses import dataclass, fields

import numpy as np

from . import kernels
from .errors import ShapeError
from .numerics import init_matrix

GATES = ("f", "g", "c", "o")
CANDIDATES = ("tanh", "sigmoid")


@dataclass
class LstmParams:
    W_f: np.ndarray
    W_g: np.ndarray
    W_c: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_g: np.ndarray
    b_c: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        shape = self.W_f.shape
        for g in GATES:
            if getattr(self, "W_" + g).shape != shape:
                raise ShapeError("LSTM gate weights must share one shape")
            if getattr(self, "b_" + g).shape != (shape[0],):
                raise ShapeError("LSTM gate biases must have length hidden")
        if shape[1] <= shape[0]:
            raise ShapeError(f"gate weight shape {shape} leaves no room for the input")

    @property
    def hidden(self):
        return self.W_f.shape[0]

    @property
    def input_size(self):
        return self.W_f.shape[1] - self.W_f.shape[0]

    @classmethod
    def init(cls, hidden, input_size, rng):
        """Xavier-uniform weights, zero biases."""
        k = hidden + input_size
        Ws = {f"W_{g}": init_matrix(hidden, k, "xavier_uniform", rng) for g in GATES}
        bs = {f"b_{g}": np.zeros(hidden) for g in GATES}
        return cls(**Ws, **bs)

    @classmethod
    def zeros(cls, hidden, input_size):
        k = hidden + input_size
        return cls(**{f"W_{g}": np.zeros((hidden, k)) for g in GATES},
                   **{f"b_{g}": np.zeros(hidden) for g in GATES})

    def stacked(self):
        W = np.concatenate([self.W_f, self.W_g, self.W_c, self.W_o], axis=0)
        b = np.concatenate([self.b_f, self.b_g, self.b_c, self.b_o])
        return W, b

    @classmethod
    def from_stacked(cls, W, b):
        Ws = np.split(W, 4, axis=0)
        bs = np.split(b, 4)
        return cls(*[w.copy() for w in Ws], *[v.copy() for v in bs])

    def as_dict(self, prefix=""):
        return {prefix + f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d, prefix=""):
        return cls(**{f.name: d[prefix + f.name] for f in fields(cls)})


@dataclass
class LstmStepCache:
    x: np.ndarray
    h_prev: np.ndarray
    s_prev: np.ndarray
    f: np.ndarray
    g: np.ndarray
    c: np.ndarray
    s: np.ndarray
    o: np.ndarray
    tanh_s: np.ndarray
    candidate: str = "tanh"


@dataclass
class LstmCache:
    X: np.ndarray        # (B, T, D)
    h0: np.ndarray       # (B, H)
    s0: np.ndarray
    H: np.ndarray        # (B, T, H), row t = state after consuming position t
    S: np.ndarray
    gates: np.ndarray    # (B, T, 4H) post-activation f, g, c, o
    tanh_s: np.ndarray
    reverse: bool
    candidate: str
    batched: bool

    @property
    def hidden(self):
        return self.h0.shape[1]

    def step(self, t, row=0):
        """Per-timestep view in the shape of ``LstmStepCache``."""
        H = self.hidden
        T = self.X.shape[1]
        order = list(range(T - 1, -1, -1)) if self.reverse else list(range(T))
        k = order.index(t)
        if k == 0:
            h_prev, s_prev = self.h0[row], self.s0[row]
        else:
            h_prev, s_prev = self.H[row, order[k - 1]], self.S[row, order[k - 1]]
        gt = self.gates[row, t]
        return LstmStepCache(x=self.X[row, t], h_prev=h_prev, s_prev=s_prev,
                             f=gt[:H], g=gt[H:2 * H], c=gt[2 * H:3 * H], o=gt[3 * H:],
                             s=self.S[row, t], tanh_s=self.tanh_s[row, t],
                             candidate=self.candidate)


def _check_candidate(candidate):
    if candidate not in CANDIDATES:
        raise ValueError(f"candidate activation must be one of {CANDIDATES}, got {candidate!r}")


def _state(v, nb, hidden, name):
    if v is None:
        return np.zeros((nb, hidden))
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 1:
        v = v[None, :]
    if v.shape != (nb, hidden):
        raise ShapeError(f"{name} has shape {v.shape}, expected {(nb, hidden)}")
    return np.ascontiguousarray(v)


def unroll_forward(X, params, direction="forward", h0=None, s0=None, candidate="tanh"):
    """Run the cell over every position of ``X``.

    Returns ``(H, cache)`` where ``H[..., t, :]`` is the hidden state after
    consuming position ``t``; for ``direction="reverse"`` the sequence is read
    from the end but ``H`` stays indexed by input position.
    """
    _check_candidate(candidate)
    if direction not in ("forward", "reverse"):
        raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    X = np.asarray(X, dtype=np.float64)
    batched = X.ndim == 3
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[2] != params.input_size:
        raise ShapeError(f"input of shape {X.shape} does not match LSTM input size {params.input_size}")
    X = np.ascontiguousarray(X)
    nb = X.shape[0]
    h0 = _state(h0, nb, params.hidden, "h0")
    s0 = _state(s0, nb, params.hidden, "s0")
    W, b = params.stacked()
    reverse = direction == "reverse"
    Hs, Ss, gates, ts = kernels.lstm_forward(X, np.ascontiguousarray(W.T), b, h0, s0,
                                             reverse, candidate == "sigmoid")
    cache = LstmCache(X=X, h0=h0, s0=s0, H=Hs, S=Ss, gates=gates, tanh_s=ts,
                      reverse=reverse, candidate=candidate, batched=batched)
    return (Hs if batched else Hs[0]), cache


def unroll_backward(dH, cache, params, ds_last=None, return_state_grads=False):
    """Backpropagation through time.

    ``dH`` is the loss gradient w.r.t. every hidden state (same layout as the
    forward ``H``); ``ds_last`` optionally adds a gradient on the cell state of
    the final processed step.  Returns ``(dX, dparams)`` and, when asked,
    ``(dh0, ds0)`` as well.  Parameter gradients are summed over time and batch.
    """
    if cache.hidden != params.hidden or cache.X.shape[2] != params.input_size:
        raise ShapeError("LSTM cache does not match the parameters")
    dH = np.asarray(dH, dtype=np.float64)
    if dH.ndim == 2:
        dH = dH[None]
    if dH.shape != cache.H.shape:
        raise ShapeError(f"dH shape {dH.shape} does not match cached states {cache.H.shape}")
    nb = cache.X.shape[0]
    ds_last = _state(ds_last, nb, params.hidden, "ds_last")
    W, _ = params.stacked()
    dX, dW, db, dh0, ds0 = kernels.lstm_backward(
        np.ascontiguousarray(dH), ds_last, cache.X, np.ascontiguousarray(W),
        cache.h0, cache.s0, cache.H, cache.S, cache.gates, cache.tanh_s,
        cache.reverse, cache.candidate == "sigmoid")
    dparams = LstmParams.from_stacked(dW, db)
    if not cache.batched:
        dX, dh0, ds0 = dX[0], dh0[0], ds0[0]
    if return_state_grads:
        return dX, dparams, dh0, ds0
    return dX, dparams


def cell_forward(x_t, h_prev, s_prev, params, candidate="tanh"):
    """One LSTM step; returns ``(h_t, s_t, LstmStepCache)``."""
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.ndim != 1:
        raise ShapeError("cell_forward takes a single input vector")
    _, cache = unroll_forward(x_t[None, :], params, h0=h_prev, s0=s_prev, candidate=candidate)
    step = cache.step(0)
    return cache.H[0, 0], step.s, step


def cell_backward(dh_t, ds_t, cache, params):
    """Gradients of one step: ``(dx_t, dh_prev, ds_prev, dparams)``."""
    H = params.hidden
    if cache.f.shape != (H,) or cache.x.shape != (params.input_size,):
        raise ShapeError("step cache does not match the parameters")
    gates = np.concatenate([cache.f, cache.g, cache.c, cache.o])[None, None, :]
    s_t = cache.s.reshape(1, 1, H)
    W, _ = params.stacked()
    dX, dW, db, dh0, ds0 = kernels.lstm_backward(
        np.asarray(dh_t, dtype=np.float64).reshape(1, 1, H),
        np.asarray(ds_t, dtype=np.float64).reshape(1, H),
        cache.x.reshape(1, 1, -1), np.ascontiguousarray(W),
        cache.h_prev.reshape(1, H), cache.s_prev.reshape(1, H),
        # one step: the kernel never reads the cached states of earlier steps
        s_t, s_t,
        np.ascontiguousarray(gates), cache.tanh_s.reshape(1, 1, H),
        False, cache.candidate == "sigmoid")
    return dX[0, 0], dh0[0], ds0[0], LstmParams.from_stacked(dW, db)
