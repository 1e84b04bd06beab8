"""
Word vectors: skip-gram with negative sampling, word2vec text I/O and lookup.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .corpus import PAD_ID, UNK_ID
from .errors import DataError, ShapeError
from .numerics import init_matrix

# pairs per kernel call; bounds the size of the pre-drawn negative table
_CHUNK_PAIRS = 200_000


@dataclass
class EmbeddingMatrix:
    table: np.ndarray
    trainable: bool = True

    @property
    def dim(self):
        return self.table.shape[1]

    @property
    def vocab_size(self):
        return self.table.shape[0]


def _pairs(seq, window):
    """(center, context) id pairs of one document in corpus order."""
    keep = seq[(seq != PAD_ID) & (seq != UNK_ID)]
    n = keep.size
    centers, contexts = [], []
    for off in range(-window, window + 1):
        if off == 0:
            continue
        lo, hi = max(0, -off), min(n, n - off)
        if hi <= lo:
            continue
        idx = np.arange(lo, hi)
        centers.append(idx)
        contexts.append(idx + off)
    if not centers:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    ci = np.concatenate(centers)
    oi = np.concatenate(contexts)
    # order by center position, then by offset
    order = np.lexsort((oi, ci))
    return keep[ci[order]], keep[oi[order]]


def noise_distribution(docs, vocab_size, power=0.75):
    counts = np.zeros(vocab_size)
    for seq in docs:
        counts += np.bincount(seq, minlength=vocab_size)[:vocab_size]
    counts[PAD_ID] = 0.0
    counts[UNK_ID] = 0.0
    weights = counts ** power
    total = weights.sum()
    if total <= 0:
        raise DataError("corpus has no trainable tokens")
    return weights / total


def train_skipgram(docs, vocab_size, dim=200, window=5, negatives=5, epochs=5,
                   lr=0.025, seed=0, vectors="sum", return_losses=False):
    """Skip-gram with negative sampling over id sequences.

    ``docs`` are id arrays (padding and unknown ids are skipped).  The learning
    rate decays linearly to ``1e-4 * lr`` across all epochs.  The exported table
    is input + output vectors (``vectors="sum"``) or the input vectors alone
    (``"input"``); the padding row is zeroed.  With ``return_losses`` the mean
    per-pair loss of every epoch is returned too.
    """
    if dim < 2 or window < 1 or negatives < 1:
        raise ValueError("need dim >= 2, window >= 1, negatives >= 1")
    if vectors not in ("sum", "input"):
        raise ValueError(f"unknown vectors mode {vectors!r}")
    docs = [np.asarray(d, dtype=np.int64) for d in docs]
    pairs = [_pairs(d, window) for d in docs]
    pairs = [p for p in pairs if p[0].size]
    if not pairs:
        raise DataError("corpus has no trainable (center, context) pair")
    centers = np.concatenate([p[0] for p in pairs])
    contexts = np.concatenate([p[1] for p in pairs])
    cdf = np.cumsum(noise_distribution(docs, vocab_size))
    cdf[-1] = 1.0

    rng = np.random.Generator(np.random.PCG64(seed))
    W_in = rng.uniform(-0.5 / dim, 0.5 / dim, size=(vocab_size, dim))
    W_out = np.zeros((vocab_size, dim))

    n_pairs = centers.size
    total = float(n_pairs * epochs)
    done = 0
    losses = []
    for _ in range(epochs):
        epoch_loss = 0.0
        for start in range(0, n_pairs, _CHUNK_PAIRS):
            stop = min(start + _CHUNK_PAIRS, n_pairs)
            u = rng.random((stop - start, negatives))
            negs = np.searchsorted(cdf, u, side="right").astype(np.int64)
            epoch_loss += kernels.sgns_chunk(W_in, W_out, centers[start:stop],
                                             contexts[start:stop], negs, lr, done, total)
            done += stop - start
        losses.append(epoch_loss / n_pairs)
    table = W_in + W_out if vectors == "sum" else W_in
    table[PAD_ID] = 0.0
    emb = EmbeddingMatrix(table=table)
    if return_losses:
        return emb, losses
    return emb


def save_word2vec(path, emb, vocab):
    """word2vec text format; the padding row is not written."""
    table = emb.table
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(vocab) - 1} {emb.dim}\n")
        for idx in range(1, len(vocab)):
            vals = " ".join(repr(float(v)) for v in table[idx])
            fh.write(f"{vocab.token_of(idx)} {vals}\n")


def load_embeddings(path, vocab, rng, dim=None):
    """Copy vectors for vocabulary tokens found in a word2vec text file.

    Tokens missing from the file get xavier-uniform rows drawn from ``rng`` in id
    order, so the fallback is reproducible.  ``dim`` (when given) must match
    the file header.
    """
    with open(path, encoding="utf-8", errors="replace") as fh:
        header = fh.readline().split()
        if len(header) != 2 or not all(h.isdigit() for h in header):
            raise DataError(f"{path}:1: malformed header {' '.join(header)!r}")
        count, file_dim = int(header[0]), int(header[1])
        if dim is not None and file_dim != dim:
            raise DataError(f"{path}: embedding dim {file_dim} does not match configured {dim}")
        vectors = {}
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if parts == [""]:
                continue
            if len(parts) != file_dim + 1:
                raise DataError(f"{path}:{lineno}: expected {file_dim} values, got {len(parts) - 1}")
            try:
                vec = np.array([float(v) for v in parts[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
            vectors[parts[0]] = vec
    if len(vectors) != count:
        raise DataError(f"{path}: header declares {count} vectors, found {len(vectors)}")
    table = init_matrix(len(vocab), file_dim, "xavier_uniform", rng)
    for idx in range(2, len(vocab)):
        vec = vectors.get(vocab.token_of(idx))
        if vec is not None:
            table[idx] = vec
    if "<unk>" in vectors:
        table[UNK_ID] = vectors["<unk>"]
    table[PAD_ID] = 0.0
    return EmbeddingMatrix(table=table)


def lookup(ids, table):
    """Rows of ``table`` for ``ids``; padding positions always give zeros."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(f"id out of range for table with {table.shape[0]} rows")
    out = table[ids]
    out[ids == PAD_ID] = 0.0
    return out


def lookup_backward(ids, d_out, vocab_size):
    """Scatter-add of output gradients into table rows (padding row stays zero)."""
    ids = np.asarray(ids, dtype=np.int64).ravel()
    grad = np.zeros((vocab_size, d_out.shape[-1]))
    np.add.at(grad, ids, d_out.reshape(ids.size, -1))
    grad[PAD_ID] = 0.0
    return grad
