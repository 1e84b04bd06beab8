"""
Marker-token corpus: class 1 documents contain the token ``marker`` once,
class 0 documents never do.  Separable by construction.
"""

from pathlib import Path

import numpy as np

from .corpus import Document

MARKER = "marker"


def filler_vocabulary(size=30):
    return [f"w{i:02d}" for i in range(size)]


def marker_corpus(n_docs=200, length=20, n_filler=30, seed=1, min_length=None):
    """Balanced two-class corpus of tokenised documents."""
    rng = np.random.Generator(np.random.PCG64(seed))
    filler = filler_vocabulary(n_filler)
    lo = length if min_length is None else min_length
    docs = []
    for i in range(n_docs):
        label = i % 2
        n = int(rng.integers(lo, length + 1))
        toks = [filler[j] for j in rng.integers(0, n_filler, size=n)]
        if label == 1:
            toks[int(rng.integers(0, n))] = MARKER
        docs.append(Document(label=label, tokens=toks))
    return docs


def write_dataset(root, docs, names=("absent", "present")):
    """Lay documents out as ``root/<category>/<nnnn>.txt``."""
    root = Path(root)
    for name in names:
        (root / name).mkdir(parents=True, exist_ok=True)
    for i, doc in enumerate(docs):
        (root / names[doc.label] / f"{i:04d}.txt").write_text(" ".join(doc.tokens) + "\n")
    return root
