"""
Hot numeric loops.

Every kernel has two implementations: an explicit-loop version compiled with
numba (``*_nb``) and a vectorised numpy version (``*_np``).  The public names at
the bottom of the module are bound to one or the other according to
``wrnn._accel.JIT_ENABLED``.  Both paths are deterministic; they agree to
rounding error, not bitwise (BLAS and numba sum in different orders).

LSTM gate layout in the stacked weight matrix ``W`` (4H x (H + D)) is
``[forget, input, candidate, output]`` and the gate input is ``[h_prev ; x_t]``.
"""

import math

import numpy as np

from ._accel import JIT_ENABLED, njit


# ---------------------------------------------------------------- matmul


@njit
def matmul_nb(A, B):
    n, m = A.shape
    p = B.shape[1]
    C = np.zeros((n, p))
    # i-k-j order: C[i, j] still accumulates over k left to right
    for i in range(n):
        for k in range(m):
            a = A[i, k]
            for j in range(p):
                C[i, j] += a * B[k, j]
    return C


def matmul_np(A, B):
    return A @ B


# ---------------------------------------------------------------- scalar helpers


@njit(inline="always")
def _sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def sigmoid_np(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


# ---------------------------------------------------------------- LSTM forward


@njit
def lstm_forward_nb(X, WT, b, h0, s0, reverse, cand_sigmoid):
    nb, T, D = X.shape
    H = h0.shape[1]
    K = H + D
    G4 = 4 * H
    Hs = np.empty((nb, T, H))
    Ss = np.empty((nb, T, H))
    gates = np.empty((nb, T, G4))
    tanh_s = np.empty((nb, T, H))
    hx = np.empty(K)
    z = np.empty(G4)
    for r in range(nb):
        for j in range(H):
            hx[j] = h0[r, j]
        s_prev = s0[r].copy()
        for step in range(T):
            t = T - 1 - step if reverse else step
            for d in range(D):
                hx[H + d] = X[r, t, d]
            z[:] = 0.0
            for k in range(K):
                v = hx[k]
                for j in range(G4):
                    z[j] += v * WT[k, j]
            for j in range(G4):
                z[j] += b[j]
            for j in range(H):
                f = _sigmoid(z[j])
                g = _sigmoid(z[H + j])
                if cand_sigmoid:
                    c = _sigmoid(z[2 * H + j])
                else:
                    c = math.tanh(z[2 * H + j])
                o = _sigmoid(z[3 * H + j])
                s = f * s_prev[j] + g * c
                ts = math.tanh(s)
                h = o * ts
                gates[r, t, j] = f
                gates[r, t, H + j] = g
                gates[r, t, 2 * H + j] = c
                gates[r, t, 3 * H + j] = o
                Ss[r, t, j] = s
                tanh_s[r, t, j] = ts
                Hs[r, t, j] = h
                s_prev[j] = s
                hx[j] = h
    return Hs, Ss, gates, tanh_s


def lstm_forward_np(X, WT, b, h0, s0, reverse, cand_sigmoid):
    nb, T, D = X.shape
    H = h0.shape[1]
    Hs = np.empty((nb, T, H))
    Ss = np.empty((nb, T, H))
    gates = np.empty((nb, T, 4 * H))
    tanh_s = np.empty((nb, T, H))
    h, s = h0, s0
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        z = np.concatenate([h, X[:, t]], axis=1) @ WT + b
        f = sigmoid_np(z[:, :H])
        g = sigmoid_np(z[:, H:2 * H])
        c = sigmoid_np(z[:, 2 * H:3 * H]) if cand_sigmoid else np.tanh(z[:, 2 * H:3 * H])
        o = sigmoid_np(z[:, 3 * H:])
        s = f * s + g * c
        ts = np.tanh(s)
        h = o * ts
        gates[:, t] = np.concatenate([f, g, c, o], axis=1)
        Ss[:, t] = s
        tanh_s[:, t] = ts
        Hs[:, t] = h
    return Hs, Ss, gates, tanh_s


# ---------------------------------------------------------------- LSTM backward


@njit
def lstm_backward_nb(dH, ds_last, X, W, h0, s0, Hs, Ss, gates, tanh_s, reverse, cand_sigmoid):
    nb, T, D = X.shape
    H = h0.shape[1]
    K = H + D
    G4 = 4 * H
    dX = np.zeros((nb, T, D))
    dW = np.zeros((G4, K))
    db = np.zeros(G4)
    dh0 = np.zeros((nb, H))
    ds0 = np.zeros((nb, H))
    hx = np.empty(K)
    dz = np.empty(G4)
    dhx = np.empty(K)
    dh_next = np.empty(H)
    ds_next = np.empty(H)
    for r in range(nb):
        dh_next[:] = 0.0
        for j in range(H):
            ds_next[j] = ds_last[r, j]
        for step in range(T - 1, -1, -1):
            t = T - 1 - step if reverse else step
            has_prev = step > 0
            tp = 0
            if has_prev:
                tp = T - step if reverse else step - 1
            for j in range(H):
                hx[j] = Hs[r, tp, j] if has_prev else h0[r, j]
            for d in range(D):
                hx[H + d] = X[r, t, d]
            for j in range(H):
                f = gates[r, t, j]
                g = gates[r, t, H + j]
                c = gates[r, t, 2 * H + j]
                o = gates[r, t, 3 * H + j]
                ts = tanh_s[r, t, j]
                sp = Ss[r, tp, j] if has_prev else s0[r, j]
                dh = dH[r, t, j] + dh_next[j]
                ds = ds_next[j] + dh * o * (1.0 - ts * ts)
                dz[j] = ds * sp * f * (1.0 - f)
                dz[H + j] = ds * c * g * (1.0 - g)
                if cand_sigmoid:
                    dz[2 * H + j] = ds * g * c * (1.0 - c)
                else:
                    dz[2 * H + j] = ds * g * (1.0 - c * c)
                dz[3 * H + j] = dh * ts * o * (1.0 - o)
                ds_next[j] = ds * f
            for i in range(G4):
                gi = dz[i]
                db[i] += gi
                for k in range(K):
                    dW[i, k] += gi * hx[k]
            dhx[:] = 0.0
            for i in range(G4):
                gi = dz[i]
                for k in range(K):
                    dhx[k] += gi * W[i, k]
            for j in range(H):
                dh_next[j] = dhx[j]
            for d in range(D):
                dX[r, t, d] = dhx[H + d]
        for j in range(H):
            dh0[r, j] = dh_next[j]
            ds0[r, j] = ds_next[j]
    return dX, dW, db, dh0, ds0


def lstm_backward_np(dH, ds_last, X, W, h0, s0, Hs, Ss, gates, tanh_s, reverse, cand_sigmoid):
    nb, T, D = X.shape
    H = h0.shape[1]
    dX = np.zeros((nb, T, D))
    dW = np.zeros_like(W)
    db = np.zeros(W.shape[0])
    dh_next = np.zeros((nb, H))
    ds_next = ds_last.copy()
    order = list(range(T - 1, -1, -1)) if reverse else list(range(T))
    for step in range(T - 1, -1, -1):
        t = order[step]
        if step > 0:
            tp = order[step - 1]
            h_prev, s_prev = Hs[:, tp], Ss[:, tp]
        else:
            h_prev, s_prev = h0, s0
        f = gates[:, t, :H]
        g = gates[:, t, H:2 * H]
        c = gates[:, t, 2 * H:3 * H]
        o = gates[:, t, 3 * H:]
        ts = tanh_s[:, t]
        dh = dH[:, t] + dh_next
        ds = ds_next + dh * o * (1.0 - ts * ts)
        dc_act = g * c * (1.0 - c) if cand_sigmoid else g * (1.0 - c * c)
        dz = np.concatenate([
            ds * s_prev * f * (1.0 - f),
            ds * c * g * (1.0 - g),
            ds * dc_act,
            dh * ts * o * (1.0 - o),
        ], axis=1)
        hx = np.concatenate([h_prev, X[:, t]], axis=1)
        dW += dz.T @ hx
        db += dz.sum(axis=0)
        dhx = dz @ W
        dh_next = dhx[:, :H]
        dX[:, t] = dhx[:, H:]
        ds_next = ds * f
    return dX, dW, db, dh_next, ds_next


# ---------------------------------------------------------------- skip-gram


@njit
def sgns_chunk_nb(W_in, W_out, centers, contexts, negatives, lr0, done, total):
    dim = W_in.shape[1]
    neu = np.empty(dim)
    loss = 0.0
    for p in range(centers.shape[0]):
        lr = lr0 * max(1e-4, 1.0 - (done + p) / total)
        ci = centers[p]
        neu[:] = 0.0
        for q in range(negatives.shape[1] + 1):
            if q == 0:
                target = contexts[p]
                label = 1.0
            else:
                target = negatives[p, q - 1]
                if target == contexts[p]:
                    continue
                label = 0.0
            score = 0.0
            for d in range(dim):
                score += W_in[ci, d] * W_out[target, d]
            prob = _sigmoid(score)
            if label > 0.0:
                loss -= math.log(max(prob, 1e-12))
            else:
                loss -= math.log(max(1.0 - prob, 1e-12))
            step = (label - prob) * lr
            for d in range(dim):
                neu[d] += step * W_out[target, d]
                W_out[target, d] += step * W_in[ci, d]
        for d in range(dim):
            W_in[ci, d] += neu[d]
    return loss


def sgns_chunk_np(W_in, W_out, centers, contexts, negatives, lr0, done, total):
    loss = 0.0
    for p in range(centers.shape[0]):
        lr = lr0 * max(1e-4, 1.0 - (done + p) / total)
        ci = centers[p]
        v = W_in[ci]
        neu = np.zeros_like(v)
        targets = [(contexts[p], 1.0)]
        targets += [(n, 0.0) for n in negatives[p] if n != contexts[p]]
        for target, label in targets:
            prob = float(sigmoid_np(np.dot(v, W_out[target])))
            if label > 0.0:
                loss -= math.log(max(prob, 1e-12))
            else:
                loss -= math.log(max(1.0 - prob, 1e-12))
            step = (label - prob) * lr
            neu += step * W_out[target]
            W_out[target] += step * v
        W_in[ci] += neu
    return loss


# ---------------------------------------------------------------- dispatch

if JIT_ENABLED:
    BACKEND = "numba"
    matmul = matmul_nb
    lstm_forward = lstm_forward_nb
    lstm_backward = lstm_backward_nb
    sgns_chunk = sgns_chunk_nb
else:
    BACKEND = "numpy"
    matmul = matmul_np
    lstm_forward = lstm_forward_np
    lstm_backward = lstm_backward_np
    sgns_chunk = sgns_chunk_np
