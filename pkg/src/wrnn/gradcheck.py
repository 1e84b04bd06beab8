"""
Finite-difference checks of every hand-written gradient on tiny fixed-seed
instances (sequence length <= 5, hidden <= 4, two classes).
"""

from dataclasses import dataclass

import numpy as np

from . import models, numerics, training
from .embeddings import lookup, lookup_backward
from .lstm import LstmParams, cell_backward, cell_forward, unroll_backward, unroll_forward

TOLERANCE = 1e-5
FLOOR = 1e-8
COMPONENTS = ("lstm_cell", "lstm_unroll", "pooling", "head", "embedding", "l2",
              "wrnn_objective", "rnn_last_objective", "birnn_objective", "dnn_objective")


@dataclass
class CheckResult:
    component: str
    worst: float
    worst_where: str
    passed: bool


def _perturbed(rng, arr, scale=0.5):
    return arr + rng.normal(0.0, scale, arr.shape)


def _worst(pairs):
    """``pairs`` of (label, analytic, numeric) -> (worst error, label)."""
    worst, where = 0.0, ""
    for label, a, n in pairs:
        e = numerics.relative_error(a, n, FLOOR)
        if e >= worst:
            worst, where = e, label
    return worst, where


def _random_lstm(rng, hidden, inp):
    p = LstmParams.init(hidden, inp, rng)
    return LstmParams(*[_perturbed(rng, getattr(p, n)) for n in
                        ("W_f", "W_g", "W_c", "W_o", "b_f", "b_g", "b_c", "b_o")])


def _lstm_param_pairs(prefix, params, analytic, loss):
    out = []
    for name, arr in params.as_dict().items():
        out.append((prefix + name, getattr(analytic, name), numerics.finite_diff_grad(loss, arr)))
    return out


def check_lstm_cell(rng, corrupt=1.0):
    pairs = []
    for cand in ("tanh", "sigmoid"):
        H, D = 3, 2
        p = _random_lstm(rng, H, D)
        x, h0, s0 = rng.normal(size=D), rng.normal(size=H), rng.normal(size=H)
        ch, cs = rng.normal(size=H), rng.normal(size=H)

        def loss(_=None):
            h, s, _c = cell_forward(x, h0, s0, p, cand)
            return ch @ h + cs @ s

        _, _, cache = cell_forward(x, h0, s0, p, cand)
        dx, dh, ds, dp = cell_backward(ch, cs, cache, p)
        pairs += [(f"{cand}:dx", dx * corrupt, numerics.finite_diff_grad(loss, x)),
                  (f"{cand}:dh_prev", dh, numerics.finite_diff_grad(loss, h0)),
                  (f"{cand}:ds_prev", ds, numerics.finite_diff_grad(loss, s0))]
        pairs += _lstm_param_pairs(f"{cand}:", p, dp, loss)
    return _worst(pairs)


def check_lstm_unroll(rng, corrupt=1.0):
    pairs = []
    for cand in ("tanh", "sigmoid"):
        for direction in ("forward", "reverse"):
            T, H, D, B = 4, 3, 2, 2
            p = _random_lstm(rng, H, D)
            X = rng.normal(size=(B, T, D))
            h0, s0 = rng.normal(size=(B, H)), rng.normal(size=(B, H))

            def loss(_=None):
                Hs, _c = unroll_forward(X, p, direction, h0, s0, cand)
                return 0.5 * np.sum(Hs * Hs)

            Hs, cache = unroll_forward(X, p, direction, h0, s0, cand)
            dX, dp, dh0, ds0 = unroll_backward(Hs, cache, p, return_state_grads=True)
            tag = f"{cand}/{direction}:"
            pairs += [(tag + "dX", dX * corrupt, numerics.finite_diff_grad(loss, X)),
                      (tag + "dh0", dh0, numerics.finite_diff_grad(loss, h0)),
                      (tag + "ds0", ds0, numerics.finite_diff_grad(loss, s0))]
            pairs += _lstm_param_pairs(tag, p, dp, loss)
    return _worst(pairs)


def _tiny_spec(kind, **kw):
    base = dict(kind=kind, seq_len=5, vocab_size=7, embed_dim=3, lstm_hidden=4, hidden=4, n_classes=2)
    base.update(kw)
    return models.ModelSpec(**base)


_IDS = np.array([[2, 3, 0, 5, 6], [6, 1, 4, 4, 2], [3, 3, 2, 0, 0]])
_LABELS = np.array([0, 1, 1])
# central differences are meaningless across a ReLU kink
RELU_MARGIN = 1e-3


def _relu_margin(spec, p):
    _, cache = models.forward(spec, p, _IDS)
    head = cache.head
    margin = np.inf
    for i in range(len(head.weights) - 1):
        z = numerics.matmul(cache.acts[i], head.weights[i].T) + head.biases[i]
        margin = min(margin, float(np.abs(z).min()))
    return margin


def _tiny_params(spec, rng):
    while True:
        p = models.init_params(spec, rng)
        for k in p:
            p[k] = _perturbed(rng, p[k])
        p["embedding"][0] = 0.0
        if _relu_margin(spec, p) > RELU_MARGIN:
            return p


def _objective_pairs(spec, rng, tag, corrupt=1.0, lam=0.01):
    p = _tiny_params(spec, rng)
    _, grads = training.objective(spec, p, _IDS, _LABELS, lam)

    def loss(_=None):
        return training.objective(spec, p, _IDS, _LABELS, lam)[0]

    pairs = []
    for name, arr in p.items():
        g = grads[name] * (corrupt if name != "embedding" else 1.0)
        pairs.append((tag + name, g, numerics.finite_diff_grad(loss, arr)))
    return pairs


def check_pooling(rng, corrupt=1.0):
    pairs = []
    for mode in ("none", "softmax"):
        H = rng.normal(size=(3, 5, 4))
        w = rng.normal(size=5)
        c = rng.normal(size=(3, 4))

        def loss(_=None):
            return float(np.sum(c * models.weighted_sum(H, w, mode)))

        # analytic: dw_i = sum_b <c_b, H_bi>, through softmax when normalised
        dalpha = np.einsum("bh,bth->t", c, H)
        if mode == "softmax":
            a = models.pooling_coefficients(w, mode)
            dw = a * (dalpha - a @ dalpha)
        else:
            dw = dalpha
        pairs.append((f"{mode}:dw", dw * corrupt, numerics.finite_diff_grad(loss, w)))
        spec = _tiny_spec("wrnn", pool_norm=mode)
        pairs += [pr for pr in _objective_pairs(spec, rng, f"{mode}:model:", corrupt)
                  if pr[0].endswith("pool.w")]
    return _worst(pairs)


def check_head(rng, corrupt=1.0):
    pairs = []
    for layers in (1, 2):
        d_in, hid, C = 4, 4, 2
        ws, bs, d = [], [], d_in
        for _ in range(layers):
            ws.append(rng.normal(size=(hid, d)))
            bs.append(rng.normal(size=hid))
            d = hid
        ws.append(rng.normal(size=(C, d)))
        bs.append(rng.normal(size=C))
        head = models.ClassifierHead(ws, bs)
        y = np.array([0, 1, 1])
        while True:
            x = rng.normal(size=(3, d_in))
            acts = models.head_forward(x, head)
            margin = min(np.abs(numerics.matmul(acts[i], ws[i].T) + bs[i]).min() for i in range(layers))
            if margin > RELU_MARGIN:
                break

        def loss(_=None):
            probs = numerics.softmax(models.head_forward(x, head)[-1])
            return float(np.mean(training.batch_losses(probs, y)))

        acts = models.head_forward(x, head)
        probs = numerics.softmax(acts[-1])
        dl = probs.copy()
        dl[np.arange(3), y] -= 1.0
        dx, dWs, dbs = models.head_backward(dl / 3, acts, head)
        pairs.append((f"{layers}:dx", dx * corrupt, numerics.finite_diff_grad(loss, x)))
        for i, (W, b) in enumerate(zip(ws, bs)):
            pairs.append((f"{layers}:W{i}", dWs[i], numerics.finite_diff_grad(loss, W)))
            pairs.append((f"{layers}:b{i}", dbs[i], numerics.finite_diff_grad(loss, b)))
    return _worst(pairs)


def check_embedding(rng, corrupt=1.0):
    table = rng.normal(size=(7, 3))
    table[0] = 0.0
    C = rng.normal(size=_IDS.shape + (3,))

    def loss(_=None):
        return float(np.sum(C * lookup(_IDS, table)))

    analytic = lookup_backward(_IDS, C, 7) * corrupt
    pairs = [("lookup", analytic, numerics.finite_diff_grad(loss, table))]
    pairs += [pr for pr in _objective_pairs(_tiny_spec("wrnn"), rng, "model:")
              if pr[0].endswith("embedding")]
    return _worst(pairs)


def check_l2(rng, corrupt=1.0):
    spec = _tiny_spec("wrnn")
    p = _tiny_params(spec, rng)
    lam = 0.01
    grads = training.add_l2_grad({k: np.zeros_like(v) for k, v in p.items()}, p, lam)
    pairs = []
    for name, arr in p.items():
        pairs.append((name, grads[name] * corrupt,
                      numerics.finite_diff_grad(lambda _=None: training.l2_penalty(p, lam), arr)))
    return _worst(pairs)


def _objective_check(kind, **kw):
    def check(rng, corrupt=1.0):
        pairs = []
        for cand in ("tanh", "sigmoid"):
            pairs += _objective_pairs(_tiny_spec(kind, candidate=cand, **kw), rng, f"{cand}:", corrupt)
        return _worst(pairs)
    return check


CHECKS = {
    "lstm_cell": check_lstm_cell,
    "lstm_unroll": check_lstm_unroll,
    "pooling": check_pooling,
    "head": check_head,
    "embedding": check_embedding,
    "l2": check_l2,
    "wrnn_objective": _objective_check("wrnn"),
    "rnn_last_objective": _objective_check("rnn_last"),
    "birnn_objective": _objective_check("birnn"),
    "dnn_objective": _objective_check("dnn"),
}


def run_gradcheck(seed=0, tol=TOLERANCE, corrupt=()):
    """Run every check; components named in ``corrupt`` get a gradient scaled by 1.001."""
    unknown = set(corrupt) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown gradcheck components: {', '.join(sorted(unknown))}")
    results = []
    for name, fn in CHECKS.items():
        rng = numerics.make_rng(seed, f"gradcheck:{name}")
        worst, where = fn(rng, 1.001 if name in corrupt else 1.0)
        results.append(CheckResult(name, worst, where, worst < tol))
    return results


def format_results(results, tol=TOLERANCE):
    lines = [f"{'component':<20} {'worst rel err':>14}  status  (tolerance {tol:g})"]
    for r in results:
        lines.append(f"{r.component:<20} {r.worst:>14.3e}  {'PASS' if r.passed else 'FAIL'}    {r.worst_where}")
    return "\n".join(lines)
