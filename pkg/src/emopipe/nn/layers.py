"""Stateless layer primitives (forward and backward) used by the models."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionMismatch

CE_FLOOR = 1e-12


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int,
                   dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0)


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted by the row max for stability."""
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs, label_index: int) -> float:
    """Negative log of the probability of the true class, floored at 1e-12."""
    probs = np.asarray(probs)
    if not 0 <= label_index < probs.shape[-1]:
        raise IndexError(f"label index {label_index} out of range for {probs.shape[-1]} classes")
    return float(-np.log(max(float(probs[label_index]), CE_FLOOR)))


def mean_cross_entropy(probs: np.ndarray, labels: np.ndarray) -> float:
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= probs.shape[1]:
        raise IndexError("label index out of range")
    picked = probs[np.arange(len(labels)), labels].astype(np.float64)
    return float(np.mean(-np.log(np.maximum(picked, CE_FLOOR))))


def softmax_ce_grad(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d(mean CE)/d(logits) for a softmax output layer."""
    g = probs.copy()
    g[np.arange(len(labels)), labels] -= 1
    return g / len(labels)


def dropout_mask(rng: np.random.Generator, shape, rate: float, dtype) -> np.ndarray | None:
    """Inverted-dropout multiplier: 0 for dropped units, 1/(1-rate) for kept ones."""
    if rate <= 0.0:
        return None
    keep = rng.random(shape) >= rate
    return keep.astype(dtype) * np.asarray(1.0 / (1.0 - rate), dtype=dtype)


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    if x.shape[-1] != w.shape[1]:
        raise DimensionMismatch(f"input has {x.shape[-1]} features, layer expects {w.shape[1]}")
    return x @ w.T + b


def dense_backward(x: np.ndarray, w: np.ndarray, dz: np.ndarray):
    """Returns (dx, dw, db) for z = x @ w.T + b."""
    return dz @ w, dz.T @ x, dz.sum(axis=0)


def conv_patches(x: np.ndarray, k: int) -> np.ndarray:
    """(N, H, W) -> (N, H-k+1, W-k+1, k*k) valid, stride-1 patches."""
    n, h, w = x.shape
    p = sliding_window_view(x, (k, k), axis=(1, 2))
    return p.reshape(n, h - k + 1, w - k + 1, k * k)


def conv_forward(patches: np.ndarray, kernels: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Single-channel conv, channels-last output (N, Ho, Wo, F)."""
    f = kernels.shape[0]
    return patches @ kernels.reshape(f, -1).T + b


def conv_backward(patches: np.ndarray, dz: np.ndarray, kernel_shape):
    n, ho, wo, kk = patches.shape
    f = dz.shape[-1]
    dk = dz.reshape(-1, f).T @ patches.reshape(-1, kk)
    return dk.reshape(kernel_shape), dz.sum(axis=(0, 1, 2))


def maxpool_forward(a: np.ndarray, size: int = 2):
    """Non-overlapping max pool on (N, H, W, C); trailing rows/cols are dropped.

    Returns the pooled map and the flat argmax inside each window (first max
    wins on ties), which :func:`maxpool_backward` uses to route gradients.
    """
    n, h, w, c = a.shape
    ho, wo = h // size, w // size
    win = a[:, :ho * size, :wo * size, :].reshape(n, ho, size, wo, size, c)
    win = win.transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, size * size)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]
    return out, arg


def maxpool_backward(dout: np.ndarray, arg: np.ndarray, in_shape, size: int = 2) -> np.ndarray:
    n, h, w, c = in_shape
    ho, wo = dout.shape[1], dout.shape[2]
    win = np.zeros((n, ho, wo, c, size * size), dtype=dout.dtype)
    np.put_along_axis(win, arg[..., None], dout[..., None], axis=-1)
    win = win.reshape(n, ho, wo, c, size, size).transpose(0, 1, 4, 2, 5, 3)
    da = np.zeros(in_shape, dtype=dout.dtype)
    da[:, :ho * size, :wo * size, :] = win.reshape(n, ho * size, wo * size, c)
    return da
