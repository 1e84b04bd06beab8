"""
Document ingestion: tokenising, vocabulary, sequence-length choice, encoding
and the stratified train/test split.
"""

import csv
import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_TOKEN_RE = re.compile(r"[^\W_]+")

TOKENIZER_RULE = "lowercase; split on every non-alphanumeric character"


@dataclass
class Document:
    label: int
    tokens: list
    ids: np.ndarray = None

    @property
    def length(self):
        return len(self.tokens)


def tokenize(raw_text):
    if isinstance(raw_text, (bytes, bytearray)):
        raw_text = raw_text.decode("utf-8", errors="replace")
    return _TOKEN_RE.findall(raw_text.lower())


class Vocabulary:
    """Immutable token <-> id map with ``<pad>`` = 0 and ``<unk>`` = 1."""

    def __init__(self, tokens):
        self._tokens = [PAD_TOKEN, UNK_TOKEN]
        for tok in tokens:
            if tok in (PAD_TOKEN, UNK_TOKEN):
                continue
            self._tokens.append(tok)
        self._ids = {tok: i for i, tok in enumerate(self._tokens)}
        if len(self._ids) != len(self._tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._ids

    @property
    def tokens(self):
        return tuple(self._tokens)

    def id_of(self, token):
        return self._ids.get(token, UNK_ID)

    def token_of(self, idx):
        return self._tokens[idx]

    def content_hash(self):
        return hashlib.sha256("\n".join(self._tokens).encode("utf-8")).hexdigest()

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tok in self._tokens:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        if tokens[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise DataError(f"{path}: vocabulary must start with {PAD_TOKEN}, {UNK_TOKEN}")
        return cls(tokens[2:])


def build_vocabulary(docs, min_count=5):
    if min_count < 1:
        raise ValueError("min_count must be positive")
    counts = Counter()
    for doc in docs:
        counts.update(doc.tokens)
    if not counts:
        raise DataError("empty corpus")
    kept = [tok for tok, n in counts.items() if n >= min_count]
    kept.sort(key=lambda tok: (-counts[tok], tok))
    return Vocabulary(kept)


def select_sequence_length(lengths, theta):
    """Smallest observed length covering at least a ``theta`` fraction of docs.

    A document of length ``L`` fits when ``L <= SL``.
    """
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.size == 0:
        raise DataError("no document lengths")
    if not 0.0 < theta < 1.0:
        raise ValueError(f"theta must lie in (0, 1), got {theta}")
    ordered = np.sort(lengths)
    n = ordered.size
    # covered[i] = number of lengths <= ordered[i]
    covered = np.searchsorted(ordered, ordered, side="right")
    ok = np.nonzero(covered >= theta * n)[0]
    if ok.size == 0:
        return int(ordered[-1])
    return int(ordered[ok[0]])


@dataclass
class LengthStats:
    lengths: np.ndarray
    theta: float
    sl: int
    bucket_width: int = 10
    buckets: list = field(default_factory=list)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bucket_start", "bucket_end", "count"])
            w.writerows(self.buckets)


def length_stats(lengths, theta, bucket_width=10):
    """Lengths, chosen SL and a histogram of ``[start, end)`` buckets."""
    lengths = np.asarray(lengths, dtype=np.int64)
    sl = select_sequence_length(lengths, theta)
    n_buckets = int(lengths.max()) // bucket_width + 1
    counts = np.bincount(lengths // bucket_width, minlength=n_buckets)
    buckets = [(k * bucket_width, (k + 1) * bucket_width, int(c)) for k, c in enumerate(counts)]
    return LengthStats(lengths=lengths, theta=theta, sl=max(sl, 1),
                       bucket_width=bucket_width, buckets=buckets)


def encode_document(doc, vocab, sl):
    if sl <= 0:
        raise ValueError("sequence length must be positive")
    ids = np.zeros(sl, dtype=np.int64)
    toks = doc.tokens[:sl]
    ids[:len(toks)] = [vocab.id_of(t) for t in toks]
    return ids


def encode_tokens(tokens, vocab):
    """Untruncated, unpadded id sequence (used for embedding training)."""
    return np.array([vocab.id_of(t) for t in tokens], dtype=np.int64)


def split_dataset(docs, test_fraction, seed):
    """Stratified split; both halves keep the original document order."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.Generator(np.random.PCG64(seed))
    by_label = {}
    for i, doc in enumerate(docs):
        by_label.setdefault(doc.label, []).append(i)
    test_idx = []
    for label in sorted(by_label):
        members = by_label[label]
        if len(members) < 2:
            raise DataError(f"class too small to stratify (label {label}, {len(members)} document)")
        perm = rng.permutation(len(members))
        n_test = int(np.floor(test_fraction * len(members) + 0.5))
        n_test = min(max(n_test, 1), len(members) - 1)
        test_idx.extend(members[j] for j in perm[:n_test])
    chosen = set(test_idx)
    train = [d for i, d in enumerate(docs) if i not in chosen]
    test = [d for i, d in enumerate(docs) if i in chosen]
    return train, test


def load_dataset(root, categories=None):
    """Read ``root/<category>/<file>`` documents.

    Class ids follow the lexicographic order of the (selected) category names.
    Returns ``(docs, category_names)``.
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root not found: {root}")
    names = sorted(p.name for p in root.iterdir() if p.is_dir())
    if categories:
        missing = sorted(set(categories) - set(names))
        if missing:
            raise DataError(f"categories not found under {root}: {', '.join(missing)}")
        names = sorted(categories)
    docs = []
    for label, name in enumerate(names):
        for path in sorted((root / name).iterdir()):
            if path.is_file():
                docs.append(Document(label=label, tokens=tokenize(path.read_bytes())))
    if not docs:
        raise DataError(f"no documents found under {root}")
    return docs, names
