"""Small numpy layers for the classical backbone and baseline head.

Activations are laid out (C, H, W) for one sample or (B, C, H, W) for a
batch. Weight gradients returned by the backward functions keep the batch
axis (one gradient per sample) so callers control the reduction order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError


def _batched(x, ndim):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == ndim - 1:
        return x[None], True
    if x.ndim != ndim:
        raise ShapeError(f"expected {ndim - 1}- or {ndim}-d input, got shape {x.shape}")
    return x, False


def _unbatch(single, *arrays):
    out = tuple(a[0] if single else a for a in arrays)
    return out if len(out) > 1 else out[0]


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# --- convolution -----------------------------------------------------------

def _patches(x, k, stride):
    # (B, C, H, W) -> (B, Ho*Wo, C*k*k)
    B, C = x.shape[:2]
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    Ho, Wo = win.shape[2:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B, Ho * Wo, C * k * k)
    return cols, Ho, Wo


def _conv_check(x, kernels, stride):
    kernels = np.asarray(kernels, dtype=np.float64)
    if kernels.ndim != 4 or kernels.shape[2] != kernels.shape[3]:
        raise ShapeError(f"kernels must be (K, C, k, k), got {kernels.shape}")
    if kernels.shape[1] != x.shape[1]:
        raise ShapeError(f"kernels expect {kernels.shape[1]} channels, input has {x.shape[1]}")
    k = kernels.shape[2]
    if k > x.shape[2] or k > x.shape[3]:
        raise ShapeError(f"kernel size {k} exceeds input {x.shape[2]}x{x.shape[3]}")
    if stride < 1:
        raise ShapeError("stride must be >= 1")
    return kernels, k


def conv2d_forward(x, kernels, stride: int = 1) -> np.ndarray:
    """Valid cross-correlation (no kernel flip, no padding)."""
    x, single = _batched(x, 4)
    kernels, k = _conv_check(x, kernels, stride)
    cols, Ho, Wo = _patches(x, k, stride)
    out = np.matmul(cols, kernels.reshape(kernels.shape[0], -1).T)
    out = out.transpose(0, 2, 1).reshape(x.shape[0], kernels.shape[0], Ho, Wo)
    return _unbatch(single, out)


def conv2d_backward(x, kernels, stride: int, d_out):
    """Return (d_x, d_kernels); d_kernels is per sample for batched input."""
    x, single = _batched(x, 4)
    d_out, _ = _batched(d_out, 4)
    kernels, k = _conv_check(x, kernels, stride)
    B, C, H, W = x.shape
    K = kernels.shape[0]
    cols, Ho, Wo = _patches(x, k, stride)
    if d_out.shape != (B, K, Ho, Wo):
        raise ShapeError(f"d_out must be {(B, K, Ho, Wo)}, got {d_out.shape}")
    dO = d_out.reshape(B, K, Ho * Wo)
    d_kernels = np.matmul(dO, cols).reshape(B, *kernels.shape)
    d_cols = np.matmul(dO.transpose(0, 2, 1), kernels.reshape(K, -1))
    d_cols = d_cols.reshape(B, Ho, Wo, C, k, k)
    d_x = np.zeros_like(x)
    for i in range(k):
        for j in range(k):
            d_x[:, :, i : i + stride * Ho : stride, j : j + stride * Wo : stride] += \
                d_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return _unbatch(single, d_x, d_kernels)


# --- activations and pooling -----------------------------------------------

def relu_forward(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def relu_backward(x, d_out):
    return np.where(np.asarray(x) > 0, d_out, 0.0)


def _windows(x, size):
    B, C, H, W = x.shape
    Ho, Wo = H // size, W // size
    if Ho == 0 or Wo == 0:
        raise ShapeError(f"{H}x{W} input is smaller than the {size}x{size} pool")
    # odd trailing rows/cols are dropped
    v = x[:, :, : Ho * size, : Wo * size].reshape(B, C, Ho, size, Wo, size)
    return v.transpose(0, 1, 2, 4, 3, 5).reshape(B, C, Ho, Wo, size * size)


def pool2d(x, mode: str = "max", size: int = 2, stride: int = 2):
    """Non-overlapping window pooling (``stride`` must equal ``size``)."""
    if stride != size:
        raise ShapeError("only non-overlapping pooling (stride == size) is supported")
    x, single = _batched(x, 4)
    w = _windows(x, size)
    if mode == "avg":
        out = w.mean(axis=-1)
    elif mode == "max":
        out = w.max(axis=-1)
    else:
        raise ValueError(f"pool mode must be 'avg' or 'max', got {mode!r}")
    return _unbatch(single, out)


def pool2d_backward(x, mode: str, d_out, size: int = 2, stride: int = 2):
    """Max routes each gradient to the first maximal element of its window."""
    if stride != size:
        raise ShapeError("only non-overlapping pooling (stride == size) is supported")
    x, single = _batched(x, 4)
    d_out, _ = _batched(d_out, 4)
    B, C, H, W = x.shape
    w = _windows(x, size)
    Ho, Wo = w.shape[2:4]
    if mode == "avg":
        dw = np.repeat(d_out[..., None] / (size * size), size * size, axis=-1)
    elif mode == "max":
        dw = np.zeros_like(w)
        np.put_along_axis(dw, np.argmax(w, axis=-1)[..., None], d_out[..., None], axis=-1)
    else:
        raise ValueError(f"pool mode must be 'avg' or 'max', got {mode!r}")
    dw = dw.reshape(B, C, Ho, Wo, size, size).transpose(0, 1, 2, 4, 3, 5)
    d_x = np.zeros_like(x)
    d_x[:, :, : Ho * size, : Wo * size] = dw.reshape(B, C, Ho * size, Wo * size)
    return _unbatch(single, d_x)


def global_pool(x, mode: str = "gap"):
    """Per-channel mean (``gap``) or max (``gmp``) over all positions."""
    x, single = _batched(x, 4)
    flat = x.reshape(x.shape[0], x.shape[1], -1)
    if mode == "gap":
        out = flat.mean(axis=-1)
    elif mode == "gmp":
        out = flat.max(axis=-1)
    else:
        raise ValueError(f"global pool mode must be 'gap' or 'gmp', got {mode!r}")
    return _unbatch(single, out)


def global_pool_backward(x, mode: str, d_out):
    x, single = _batched(x, 4)
    d_out = np.asarray(d_out, dtype=np.float64).reshape(x.shape[0], x.shape[1])
    B, C, H, W = x.shape
    flat = x.reshape(B, C, H * W)
    if mode == "gap":
        d = np.repeat(d_out[..., None] / (H * W), H * W, axis=-1)
    elif mode == "gmp":
        d = np.zeros_like(flat)
        np.put_along_axis(d, np.argmax(flat, axis=-1)[..., None], d_out[..., None], axis=-1)
    else:
        raise ValueError(f"global pool mode must be 'gap' or 'gmp', got {mode!r}")
    return _unbatch(single, d.reshape(x.shape))


# --- dense and loss --------------------------------------------------------

def dense_forward(x, weights):
    """Bias-free ``W @ x``; ``x`` may be (in,) or (B, in)."""
    x, single = _batched(x, 2)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2 or weights.shape[1] != x.shape[1]:
        raise ShapeError(f"weights {weights.shape} do not accept inputs of length {x.shape[1]}")
    return _unbatch(single, x @ weights.T)


def dense_backward(x, weights, d_out):
    """Return (d_x, d_weights); d_weights is per sample for batched input."""
    x, single = _batched(x, 2)
    d_out, _ = _batched(d_out, 2)
    weights = np.asarray(weights, dtype=np.float64)
    d_x = d_out @ weights
    d_w = d_out[:, :, None] * x[:, None, :]
    return _unbatch(single, d_x, d_w)


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_ce(logits, label):
    """Cross-entropy of softmax(logits) against an integer label.

    Works row-wise when ``logits`` is (B, K) and ``label`` is (B,).
    Returns (loss, d_logits) with loss per row in the batched case.
    """
    logits = np.asarray(logits, dtype=np.float64)
    single = logits.ndim == 1
    z = logits[None] if single else logits
    labels = np.atleast_1d(np.asarray(label))
    if labels.shape[0] != z.shape[0]:
        raise ShapeError(f"{z.shape[0]} logit rows but {labels.shape[0]} labels")
    if np.any(labels < 0) or np.any(labels >= z.shape[1]):
        raise IndexError(f"label out of range for {z.shape[1]} classes")
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(z.shape[0])
    loss = log_norm - shifted[rows, labels]
    grad = np.exp(shifted - log_norm[:, None])
    grad[rows, labels] -= 1.0
    if single:
        return float(loss[0]), grad[0]
    return loss, grad


# --- optimizer ---------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, **hyper) -> "AdamState":
        p = np.asarray(params, dtype=np.float64)
        return cls(np.zeros_like(p), np.zeros_like(p), **hyper)


def adam_step(params, grads, state: AdamState):
    """Bias-corrected Adam update. Returns (new_params, new_state)."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ShapeError(f"params {params.shape}, grads {grads.shape}, state {state.m.shape} differ")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * (grads * grads)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new, AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)
