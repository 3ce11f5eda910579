"""Dense numeric primitives shared by the network and the CRF.

Vectors and matrices are plain numpy arrays. ``WIDE`` (float64) is used for
training and gradient checks; ``NARROW`` (float32) is allowed for inference.
"""

from __future__ import annotations

import numpy as np

WIDE = np.float64
NARROW = np.float32

# Stand-in for -inf where a float32 pass would otherwise mix inf arithmetic.
NARROW_NEG = -1e30


def neg_inf(dtype) -> float:
    return -np.inf if np.dtype(dtype) == np.float64 else NARROW_NEG


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    v = np.asarray(v)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ValueError(f"matvec shape mismatch: {m.shape} x {v.shape}")
    return m @ v


def sigmoid(x):
    # tanh form never overflows, unlike 1 / (1 + exp(-x)) for large -x.
    x = np.asarray(x)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def tanh(x):
    return np.tanh(x)


def logsumexp(v, axis=None):
    """Max-shifted ``log(sum(exp(v)))``; -inf entries carry no mass.

    With ``axis=None`` the input must be non-empty and a scalar is returned.
    """
    v = np.asarray(v)
    if v.size == 0:
        raise ValueError("logsumexp of an empty vector")
    m = np.max(v, axis=axis, keepdims=True)
    # All -inf slices: shift by 0 so the result is -inf rather than nan.
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(v - m), axis=axis, keepdims=True)) + m
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)
