"""
Dense-matrix helpers, activations, initialisation and the finite-difference
gradient oracle.

Matrices are plain ``float64`` numpy arrays.  Random numbers come from numpy's
PCG64 generator (``numpy.random.Generator``), whose stream for a given seed is
fixed across platforms; sub-seeds are derived by hashing a component name so
adding a new consumer never shifts the streams of existing ones.
"""

import hashlib
import os

import numpy as np

from . import kernels
from .errors import NumericalError, ShapeError

VALIDATE = os.environ.get("WRNN_VALIDATE", "") not in ("", "0")

ACTIVATIONS = ("sigmoid", "tanh", "relu")


def derive_seed(seed, component):
    """64-bit sub-seed for ``component`` under the experiment seed."""
    digest = hashlib.sha256(f"{int(seed)}:{component}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed, component=None):
    if component is not None:
        seed = derive_seed(seed, component)
    return np.random.Generator(np.random.PCG64(seed))


def check_finite(name, X):
    if not np.all(np.isfinite(X)):
        raise NumericalError(f"non-finite entries in {name}")


def matmul(A, B):
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {A.shape} x {B.shape}")
    C = kernels.matmul(A, B)
    if VALIDATE:
        check_finite("matmul result", C)
    return C


def sigmoid(X):
    return kernels.sigmoid_np(np.asarray(X, dtype=np.float64))


def activate(kind, X):
    X = np.asarray(X, dtype=np.float64)
    if kind == "sigmoid":
        return sigmoid(X)
    if kind == "tanh":
        return np.tanh(X)
    if kind == "relu":
        return np.maximum(X, 0.0)
    raise ValueError(f"unknown activation {kind!r}")


def activate_grad(kind, Y):
    """Derivative expressed through the activation output ``Y``."""
    if kind == "sigmoid":
        return Y * (1.0 - Y)
    if kind == "tanh":
        return 1.0 - Y * Y
    if kind == "relu":
        return (Y > 0).astype(np.float64)
    raise ValueError(f"unknown activation {kind!r}")


def softmax(logits):
    """Softmax over the last axis, max-shifted."""
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0:
        raise ShapeError("softmax of an empty vector")
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def init_matrix(rows, cols, scheme, rng):
    if rows <= 0 or cols <= 0:
        raise ShapeError(f"init_matrix needs positive dims, got {rows}x{cols}")
    if scheme == "zeros":
        return np.zeros((rows, cols))
    if scheme == "xavier_uniform":
        bound = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-bound, bound, size=(rows, cols))
    raise ValueError(f"unknown init scheme {scheme!r}")


def finite_diff_grad(f, params, eps=1e-5):
    """Central-difference gradient of scalar ``f`` at ``params``.

    ``params`` is perturbed in place one entry at a time and restored.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    grad = np.zeros(params.shape)
    flat = params.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = float(f(params))
        flat[i] = old - eps
        fm = float(f(params))
        flat[i] = old
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError(f"non-finite objective at coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def relative_error(analytic, numeric, floor=1e-8):
    """Worst ``|a - n| / max(|a|, |n|)`` over coordinates with ``|a| > floor``.

    Returns 0.0 when no coordinate qualifies.
    """
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    mask = np.abs(a) > floor
    if not mask.any():
        return 0.0
    a, n = a[mask], n[mask]
    return float(np.max(np.abs(a - n) / np.maximum(np.abs(a), np.abs(n))))
