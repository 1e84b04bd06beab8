"""
Objective, Adam, clipping and the minibatch training loop.
"""

import copy
import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import models
from .errors import DataError, NumericalError, ShapeError
from .numerics import make_rng

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


@dataclass
class TrainConfig:
    lr: float = 0.01
    batch_size: int = 128
    epochs: int = 10
    l2: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 5.0
    seed: int = 1
    deterministic: bool = False

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.l2 < 0 or self.epochs < 0:
            raise ValueError("need lr > 0, batch_size >= 1, l2 >= 0, epochs >= 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.clip_norm < 0:
            raise ValueError("clip_norm must be >= 0")


def cross_entropy(probs, label):
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < probs.shape[-1]:
        raise ValueError(f"label {label} out of range for {probs.shape[-1]} classes")
    return float(-np.log(max(probs[label], PROB_FLOOR)))


def batch_losses(probs, labels):
    p = probs[np.arange(len(labels)), labels]
    return -np.log(np.maximum(p, PROB_FLOOR))


def is_weight_matrix(name):
    """LSTM and classifier weight matrices; not biases, embeddings or position weights."""
    return name.rpartition(".")[2].startswith("W_")


def l2_penalty(params, lam):
    total = 0.0
    for name, value in params.items():
        if is_weight_matrix(name):
            total += float(np.sum(value * value))
    return 0.5 * lam * total


def add_l2_grad(grads, params, lam):
    if lam == 0:
        return grads
    for name in grads:
        if is_weight_matrix(name):
            grads[name] = grads[name] + lam * params[name]
    return grads


def objective(spec, params, ids, labels, lam):
    """Mean cross-entropy plus the L2 term, with its full gradient."""
    probs, cache = models.forward(spec, params, ids)
    loss = float(np.mean(batch_losses(probs, labels))) + l2_penalty(params, lam)
    grads = add_l2_grad(models.backward(spec, cache, labels), params, lam)
    return loss, grads


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state, cfg):
    """One bias-corrected Adam update of every parameter present in ``grads``.

    ``params`` is updated in place; returns ``(params, state)``.
    """
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
    return params, state


def global_norm(grads):
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_gradients(grads, clip_norm):
    if clip_norm <= 0:
        return grads
    norm = global_norm(grads)
    if norm <= clip_norm:
        return grads
    scale = clip_norm / norm
    return {k: g * scale for k, g in grads.items()}


@dataclass
class HistoryRow:
    epoch: int
    train_loss: float
    train_objective: float
    train_accuracy: float
    test_loss: float
    test_accuracy: float
    seconds: float


@dataclass
class TrainHistory:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "split", "loss", "accuracy"])
            for r in self.rows:
                w.writerow([r.epoch, "train", repr(r.train_loss), repr(r.train_accuracy)])
                if not np.isnan(r.test_loss):
                    w.writerow([r.epoch, "test", repr(r.test_loss), repr(r.test_accuracy)])


@dataclass
class TrainResult:
    params: dict
    best_params: dict
    best_epoch: int
    history: TrainHistory


def evaluate(spec, params, ids, labels, batch_size=256):
    """``(mean loss, accuracy, predictions, per-example losses)``."""
    probs = models.predict_proba(spec, params, ids, batch_size)
    labels = np.asarray(labels, dtype=np.int64)
    losses = batch_losses(probs, labels)
    preds = probs.argmax(axis=1)
    return float(losses.mean()), float(np.mean(preds == labels)), preds, losses


def _norms(params):
    return ", ".join(f"{k}={np.linalg.norm(v):.3g}" for k, v in params.items())


def train(spec, params, train_ids, train_labels, cfg, test_ids=None, test_labels=None,
          on_epoch=None):
    """Minibatch Adam on mean cross-entropy + L2.

    The train row of each epoch averages the minibatch losses and accuracies
    seen during that epoch (before each update).  ``best_params`` is the
    snapshot with the highest test accuracy (earliest epoch on ties), or the
    final parameters when no test set is given.
    """
    train_ids = np.asarray(train_ids, dtype=np.int64)
    train_labels = np.asarray(train_labels, dtype=np.int64)
    if len(train_ids) == 0:
        raise DataError("empty training set")
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    names = models.trainable_names(spec, params)
    rng = make_rng(cfg.seed, "shuffle")
    state = AdamState()
    history = TrainHistory()
    best_params, best_epoch, best_acc = copy.deepcopy(params), 0, -1.0
    n = len(train_ids)
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        ce_sum = obj_sum = correct = 0.0
        n_batches = 0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            labels = train_labels[idx]
            probs, cache = models.forward(spec, params, train_ids[idx])
            ce = float(np.mean(batch_losses(probs, labels)))
            obj = ce + l2_penalty(params, cfg.l2)
            if not np.isfinite(obj):
                raise NumericalError(f"non-finite loss at epoch {epoch}, batch {bi}; "
                                     f"parameter norms: {_norms(params)}")
            grads = models.backward(spec, cache, labels)
            grads = add_l2_grad({k: grads[k] for k in names}, params, cfg.l2)
            grads = clip_gradients(grads, cfg.clip_norm)
            adam_step(params, grads, state, cfg)
            ce_sum += ce
            obj_sum += obj
            correct += float(np.sum(probs.argmax(axis=1) == labels))
            n_batches += 1
        test_loss = test_acc = float("nan")
        if test_ids is not None and len(test_ids):
            test_loss, test_acc, _, _ = evaluate(spec, params, test_ids, test_labels)
            if test_acc > best_acc:
                best_acc, best_epoch = test_acc, epoch
                best_params = copy.deepcopy(params)
        else:
            best_epoch, best_params = epoch, copy.deepcopy(params)
        row = HistoryRow(epoch=epoch, train_loss=ce_sum / n_batches,
                         train_objective=obj_sum / n_batches, train_accuracy=correct / n,
                         test_loss=test_loss, test_accuracy=test_acc,
                         seconds=time.perf_counter() - t0)
        history.rows.append(row)
        log.info("epoch %d  train loss %.4f acc %.4f  test loss %.4f acc %.4f  (%.1fs)",
                 epoch, row.train_loss, row.train_accuracy, test_loss, test_acc, row.seconds)
        if on_epoch is not None:
            on_epoch(row, params)
    return TrainResult(params=params, best_params=best_params, best_epoch=best_epoch, history=history)
