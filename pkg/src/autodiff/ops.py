"""Differentiable forward ops over Tensor.

Every op checks its operand shapes, computes the forward value with numpy and
records a backward closure through `apply_op`.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import expit

from .tensor import OpKind, ShapeError, Tensor, apply_op


def tensor(data, requires_grad: bool = False) -> Tensor:
    """Create a leaf tensor holding a float64 copy of `data`."""
    return Tensor(np.array(data, dtype=np.float64), requires_grad=requires_grad)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ── Elementwise arithmetic ────────────────────────────────────────────────────


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    return apply_op(
        a.data + b.data,
        OpKind.ADD,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    return apply_op(
        a.data - b.data,
        OpKind.SUB,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    return apply_op(
        a.data * b.data,
        OpKind.MUL,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)
    return apply_op(
        a.data / b.data,
        OpKind.DIV,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return apply_op(-a.data, OpKind.NEG, (a,), lambda g: (-g,))


# ── Linear algebra and reductions ─────────────────────────────────────────────


def matmul(a, b) -> Tensor:
    """Batched matrix product over the last two axes, numpy broadcasting rules."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs operands of rank >= 2, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(
            f"matmul: inner dimensions differ, {a.shape} @ {b.shape} "
            f"({a.shape[-1]} != {b.shape[-2]})"
        )

    def backward_fn(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return apply_op(a.data @ b.data, OpKind.MATMUL, (a, b), backward_fn)


def _normalize_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    return tuple(ax % ndim for ax in axes)


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)

    def backward_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)

    return apply_op(x.data.sum(axis=axes, keepdims=keepdims), OpKind.SUM, (x,), backward_fn)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _normalize_axes(axis, x.ndim)
    count = math.prod(x.shape[ax] for ax in axes)

    def backward_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return apply_op(x.data.mean(axis=axes, keepdims=keepdims), OpKind.MEAN, (x,), backward_fn)


# ── Shape manipulation ────────────────────────────────────────────────────────


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {x.shape} as {tuple(shape)}") from None
    return apply_op(data, OpKind.RESHAPE, (x,), lambda g: (g.reshape(x.shape),))


def swapaxes(x, axis1: int, axis2: int) -> Tensor:
    x = as_tensor(x)
    return apply_op(
        np.swapaxes(x.data, axis1, axis2),
        OpKind.SWAPAXES,
        (x,),
        lambda g: (np.swapaxes(g, axis1, axis2),),
    )


def broadcast_to(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    try:
        data = np.broadcast_to(x.data, shape).copy()
    except ValueError:
        raise ShapeError(f"broadcast_to: cannot broadcast {x.shape} to {shape}") from None
    return apply_op(data, OpKind.RESHAPE, (x,), lambda g: (_unbroadcast(g, x.shape),))


def transpose(x) -> Tensor:
    return swapaxes(x, -1, -2)


def flip(x, axis: int) -> Tensor:
    """Reverse the order of entries along `axis`."""
    x = as_tensor(x)
    return apply_op(np.flip(x.data, axis).copy(), OpKind.FLIP, (x,), lambda g: (np.flip(g, axis).copy(),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("concat needs at least one tensor")
    ndim = tensors[0].ndim
    ax = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(
            s != r for i, (s, r) in enumerate(zip(t.shape, tensors[0].shape)) if i != ax
        ):
            raise ShapeError(
                f"concat along axis {axis}: shapes {[u.shape for u in tensors]} disagree off-axis"
            )
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]

    def backward_fn(g):
        return tuple(np.split(g, bounds, axis=ax))

    return apply_op(
        np.concatenate([t.data for t in tensors], axis=ax), OpKind.CONCAT, tensors, backward_fn
    )


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise ShapeError(f"stack: shapes differ {sorted(shapes)}")

    def backward_fn(g):
        return tuple(np.moveaxis(g, axis, 0))

    return apply_op(np.stack([t.data for t in tensors], axis=axis), OpKind.STACK, tensors, backward_fn)


def getitem(x, index) -> Tensor:
    """Basic or advanced indexing; overlapping advanced indices accumulate."""
    x = as_tensor(x)

    def backward_fn(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        return (full,)

    return apply_op(np.array(x.data[index]), OpKind.SLICE, (x,), backward_fn)


# ── Nonlinearities ────────────────────────────────────────────────────────────


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return apply_op(out, OpKind.EXP, (x,), lambda g: (g * out,))


def log(x) -> Tensor:
    x = as_tensor(x)
    return apply_op(np.log(x.data), OpKind.LOG, (x,), lambda g: (g / x.data,))


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return apply_op(out, OpKind.TANH, (x,), lambda g: (g * (1.0 - out * out),))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = expit(x.data)
    return apply_op(out, OpKind.SIGMOID, (x,), lambda g: (g * out * (1.0 - out),))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return apply_op(np.where(mask, x.data, 0.0), OpKind.RELU, (x,), lambda g: (g * mask,))


def silu(x) -> Tensor:
    x = as_tensor(x)
    s = expit(x.data)
    return apply_op(
        x.data * s, OpKind.SILU, (x,), lambda g: (g * (s + x.data * s * (1.0 - s)),)
    )


def softplus(x) -> Tensor:
    x = as_tensor(x)
    return apply_op(
        np.logaddexp(0.0, x.data), OpKind.SOFTPLUS, (x,), lambda g: (g * expit(x.data),)
    )


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return apply_op(out, OpKind.SOFTMAX, (x,), backward_fn)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))

    def backward_fn(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return apply_op(out, OpKind.LOG_SOFTMAX, (x,), backward_fn)


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale by `gamma` and shift by `beta`."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(
            f"layer_norm: gamma {gamma.shape} / beta {beta.shape} must be ({d},) for input {x.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    x_hat = centered * inv_std
    lead = tuple(range(x.ndim - 1))

    def backward_fn(g):
        g_hat = g * gamma.data
        gx = inv_std * (
            g_hat
            - g_hat.mean(axis=-1, keepdims=True)
            - x_hat * (g_hat * x_hat).mean(axis=-1, keepdims=True)
        )
        return gx, (g * x_hat).sum(axis=lead), g.sum(axis=lead)

    return apply_op(x_hat * gamma.data + beta.data, OpKind.LAYER_NORM, (x, gamma, beta), backward_fn)


def dropout(x, rate: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout; identity in eval mode or at rate 0."""
    x = as_tensor(x)
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an explicit RNG stream")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return apply_op(x.data * keep, OpKind.DROPOUT, (x,), lambda g: (g * keep,))


# ── Convolution and transforms ────────────────────────────────────────────────


def _window_index(n: int, taps: int, stride: int, padding: str) -> np.ndarray:
    """idx[j, k] = input position read by output j through tap k."""
    if stride < 1:
        raise ValueError(f"convolution stride must be >= 1, got {stride}")
    if padding == "periodic":
        padded = n + taps - 1
        if stride > padded:
            raise ValueError(f"stride {stride} exceeds the padded input length {padded}")
        n_out = -(-n // stride)
        return (np.arange(n_out)[:, None] * stride + np.arange(taps)[None, :]) % n
    if padding == "valid":
        if taps > n:
            raise ValueError(f"filter of length {taps} is longer than the input ({n})")
        if stride > n:
            raise ValueError(f"stride {stride} exceeds the input length {n}")
        n_out = (n - taps) // stride + 1
        return np.arange(n_out)[:, None] * stride + np.arange(taps)[None, :]
    raise ValueError(f"unknown padding {padding!r}; expected 'periodic' or 'valid'")


def _conv_matrix(idx: np.ndarray, taps: np.ndarray, n: int) -> np.ndarray:
    """Dense (n, n_out) matrix K with x @ K == strided correlation of x with taps."""
    n_out = idx.shape[0]
    k = np.zeros((n, n_out))
    np.add.at(k, (idx, np.broadcast_to(np.arange(n_out)[:, None], idx.shape)), np.broadcast_to(taps, idx.shape))
    return k


def conv1d(x, f, stride: int = 1, padding: str = "periodic") -> Tensor:
    """Strided cross-correlation along the last axis: y[j] = sum_k f[k] x[j*stride + k].

    `periodic` padding wraps the input (x[i mod n]); `valid` keeps only full windows.
    The filter is shared by every leading row.
    """
    x, f = as_tensor(x), as_tensor(f)
    if f.ndim != 1:
        raise ShapeError(f"conv1d filter must be 1-D, got {f.shape}")
    if x.ndim < 1:
        raise ShapeError("conv1d input must have at least one axis")
    n = x.shape[-1]
    idx = _window_index(n, f.shape[0], stride, padding)
    k = _conv_matrix(idx, f.data, n)

    def backward_fn(g):
        n_out, taps = idx.shape
        gf = np.tensordot(g.reshape(-1, n_out), x.data[..., idx].reshape(-1, n_out, taps), axes=([0, 1], [0, 1]))
        return g @ k.T, gf

    return apply_op(x.data @ k, OpKind.CONV1D, (x, f), backward_fn)


def conv_transpose1d(c, h, stride: int, out_len: int, padding: str = "periodic") -> Tensor:
    """Adjoint of `conv1d`: upsample by `stride`, then convolve with `h` (periodic wrap)."""
    c, h = as_tensor(c), as_tensor(h)
    if h.ndim != 1:
        raise ShapeError(f"conv_transpose1d filter must be 1-D, got {h.shape}")
    idx = _window_index(out_len, h.shape[0], stride, padding)
    if c.shape[-1] != idx.shape[0]:
        raise ShapeError(
            f"conv_transpose1d: {c.shape[-1]} coefficients cannot fill {out_len} outputs at stride {stride}"
        )
    k = _conv_matrix(idx, h.data, out_len)

    def backward_fn(g):
        n_in, taps = idx.shape
        gh = np.tensordot(c.data.reshape(-1, n_in), g[..., idx].reshape(-1, n_in, taps), axes=([0, 1], [0, 1]))
        return g @ k, gh

    return apply_op(c.data @ k.T, OpKind.CONV_TRANSPOSE1D, (c, h), backward_fn)


def fft_real(x, axes: Sequence[int] = (-1,)) -> Tensor:
    """Real part of the discrete Fourier transform over `axes`.

    The real part of a DFT is a symmetric linear map, so the backward pass is
    the same transform applied to the incoming gradient.
    """
    x = as_tensor(x)
    axes = tuple(axes)
    return apply_op(
        np.fft.fftn(x.data, axes=axes).real,
        OpKind.FFT_REAL,
        (x,),
        lambda g: (np.fft.fftn(g, axes=axes).real,),
    )


# ── Gradient routing ──────────────────────────────────────────────────────────


def detach(x) -> Tensor:
    x = as_tensor(x)
    return Tensor(x.data)


def gate_gradient(x, mask: np.ndarray) -> Tensor:
    """Forward identity; backward passes gradient only where `mask` is set."""
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != x.shape:
        raise ShapeError(f"gate_gradient: mask {mask.shape} does not match input {x.shape}")
    return apply_op(x.data.copy(), OpKind.GATE_GRADIENT, (x,), lambda g: (g * mask,))


def cross_entropy(logits, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer `labels` under row-wise softmax."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    logp = log_softmax(logits, axis=-1)
    picked = getitem(logp, (np.arange(labels.shape[0]), labels))
    return neg(mean(picked))
