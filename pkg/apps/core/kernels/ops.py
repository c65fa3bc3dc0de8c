"""
Forward kernels over rank-4 NCHW tensors.

Tensors are plain numpy arrays. Kernels are pure and dtype-preserving:
float32 inputs give float32 outputs, float64 inputs run end-to-end in double
precision. Reductions (conv2d, linear, global_avg_pool, l1_loss) accumulate
in float64 before rounding to the storage dtype.

Shape problems raise DimensionError naming the offending axis; other invalid
arguments raise KernelError.

Usage:
    from apps.core.kernels import ops

    y = ops.conv2d(x, w, b, stride=2, padding=1)
    d = ops.pixel_shuffle(y, 2)
"""

from typing import Sequence, Tuple

import numpy as np

from apps.core.errors import DimensionError, KernelError
from apps.core.kernels.parallel import ordered_map

AXES = ("batch", "channels", "height", "width")


# ─── Helpers ────────────────────────────────────────────────────────────────

def require_rank4(x: np.ndarray, what: str = "input") -> None:
    if x.ndim != 4:
        raise DimensionError(f"{what} must be rank 4 (n, c, h, w), got shape {x.shape}", axis="rank")


def result_dtype(*arrays: np.ndarray) -> np.dtype:
    """float64 if any operand is float64, float32 otherwise."""
    if any(np.asarray(a).dtype == np.float64 for a in arrays):
        return np.dtype(np.float64)
    return np.dtype(np.float32)


def conv_output_size(size: int, k: int, stride: int, padding: int, dilation: int) -> int:
    return (size + 2 * padding - dilation * (k - 1) - 1) // stride + 1


def _pad_spatial(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _tap(size_out: int, offset: int, stride: int) -> slice:
    return slice(offset, offset + stride * (size_out - 1) + 1, stride)


def _first_mismatch(a: Tuple[int, ...], b: Tuple[int, ...], skip: Sequence[int] = ()) -> str:
    for i, (da, db) in enumerate(zip(a, b)):
        if i not in skip and da != db:
            return AXES[i]
    return "rank"


# ─── Convolution ────────────────────────────────────────────────────────────

def _check_conv(x, weight, bias, stride, padding, dilation) -> Tuple[int, int]:
    require_rank4(x)
    if weight.ndim != 4:
        raise DimensionError(f"conv weight must be rank 4, got shape {weight.shape}", axis="rank")
    c_out, c_in, kh, kw = weight.shape
    if x.shape[1] != c_in:
        raise DimensionError(
            f"conv2d input has {x.shape[1]} channels, weight expects {c_in}", axis="channels"
        )
    if kh != kw:
        raise DimensionError(f"conv2d kernel must be square, got {kh}x{kw}", axis="kernel")
    if kh % 2 == 0:
        raise KernelError(f"conv2d kernel size must be odd, got {kh}")
    if bias.shape != (c_out,):
        raise DimensionError(
            f"conv2d bias shape {bias.shape} does not match {c_out} output channels", axis="channels"
        )
    if stride < 1 or padding < 0 or dilation < 1:
        raise KernelError(
            f"invalid conv2d geometry stride={stride} padding={padding} dilation={dilation}"
        )
    h_out = conv_output_size(x.shape[2], kh, stride, padding, dilation)
    w_out = conv_output_size(x.shape[3], kh, stride, padding, dilation)
    if h_out < 1 or w_out < 1:
        raise KernelError(
            f"conv2d produces a zero-size output ({h_out}x{w_out}) for input {x.shape[2:]}"
        )
    return h_out, w_out


def conv2d(
    x: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
) -> np.ndarray:
    """2-D cross-correlation with zero padding; bias added per output channel."""
    h_out, w_out = _check_conv(x, weight, bias, stride, padding, dilation)
    k = weight.shape[2]
    dtype = result_dtype(x, weight)
    xp = _pad_spatial(x.astype(np.float64), padding)
    w64 = weight.astype(np.float64)

    # one task per batch element; each owns its output slice
    def run(i: int) -> np.ndarray:
        xs = xp[i:i + 1]
        acc = np.zeros((w64.shape[0], 1, h_out, w_out), dtype=np.float64)
        for ki in range(k):
            rows = _tap(h_out, ki * dilation, stride)
            for kj in range(k):
                cols = _tap(w_out, kj * dilation, stride)
                acc += np.tensordot(w64[:, :, ki, kj], xs[:, :, rows, cols], axes=([1], [1]))
        return acc

    parts = ordered_map(run, range(x.shape[0]))
    out = np.concatenate(parts, axis=1).transpose(1, 0, 2, 3)
    out = out + bias.astype(np.float64)[None, :, None, None]
    return out.astype(dtype)


def conv2d_backward(
    x: np.ndarray,
    weight: np.ndarray,
    grad_out: np.ndarray,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of conv2d w.r.t. input, weight and bias."""
    h, w = x.shape[2:]
    k = weight.shape[2]
    h_out, w_out = grad_out.shape[2:]
    xp = _pad_spatial(x.astype(np.float64), padding)
    w64 = weight.astype(np.float64)
    g = grad_out.astype(np.float64)

    dxp = np.zeros_like(xp)
    dw = np.zeros(weight.shape, dtype=np.float64)
    for ki in range(k):
        rows = _tap(h_out, ki * dilation, stride)
        for kj in range(k):
            cols = _tap(w_out, kj * dilation, stride)
            dw[:, :, ki, kj] = np.tensordot(g, xp[:, :, rows, cols], axes=([0, 2, 3], [0, 2, 3]))
            dxp[:, :, rows, cols] += np.tensordot(
                w64[:, :, ki, kj], g, axes=([0], [1])
            ).transpose(1, 0, 2, 3)
    dx = dxp[:, :, padding:padding + h, padding:padding + w]
    db = g.sum(axis=(0, 2, 3))
    return dx.astype(x.dtype), dw.astype(weight.dtype), db.astype(weight.dtype)


# ─── Sub-pixel rearrangement ────────────────────────────────────────────────

def pixel_shuffle(x: np.ndarray, r: int) -> np.ndarray:
    """(n, c·r², h, w) → (n, c, h·r, w·r)."""
    require_rank4(x)
    if r < 1:
        raise KernelError(f"pixel_shuffle factor must be >= 1, got {r}")
    n, channels, h, w = x.shape
    if channels % (r * r):
        raise DimensionError(
            f"pixel_shuffle needs channels divisible by {r * r}, got {channels}", axis="channels"
        )
    c = channels // (r * r)
    return x.reshape(n, c, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, h * r, w * r)


def pixel_unshuffle(x: np.ndarray, r: int) -> np.ndarray:
    """(n, c, h·r, w·r) → (n, c·r², h, w); inverse of pixel_shuffle."""
    require_rank4(x)
    if r < 1:
        raise KernelError(f"pixel_unshuffle factor must be >= 1, got {r}")
    n, c, height, width = x.shape
    if height % r:
        raise DimensionError(f"height {height} not divisible by {r}", axis="height")
    if width % r:
        raise DimensionError(f"width {width} not divisible by {r}", axis="width")
    h, w = height // r, width // r
    return x.reshape(n, c, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c * r * r, h, w)


# ─── Pooling / dense ────────────────────────────────────────────────────────

def global_avg_pool(x: np.ndarray) -> np.ndarray:
    require_rank4(x)
    if x.shape[2] * x.shape[3] < 1:
        raise KernelError(f"global_avg_pool over an empty spatial extent {x.shape[2:]}")
    return x.astype(np.float64).mean(axis=(2, 3), keepdims=True).astype(result_dtype(x))


def linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Affine map of (n, c_in, 1, 1) vectors with a (c_out, c_in) weight."""
    require_rank4(x)
    if x.shape[2:] != (1, 1):
        raise DimensionError(f"linear expects (n, c, 1, 1) input, got {x.shape}", axis="height")
    if weight.ndim != 2 or weight.shape[1] != x.shape[1]:
        raise DimensionError(
            f"linear weight {weight.shape} does not accept {x.shape[1]} input channels",
            axis="channels",
        )
    if bias.shape != (weight.shape[0],):
        raise DimensionError(
            f"linear bias {bias.shape} does not match {weight.shape[0]} outputs", axis="channels"
        )
    out = x[:, :, 0, 0].astype(np.float64) @ weight.astype(np.float64).T + bias.astype(np.float64)
    return out[:, :, None, None].astype(result_dtype(x, weight))


# ─── Elementwise ────────────────────────────────────────────────────────────

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0).astype(x.dtype, copy=False)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function, clamped so outputs stay strictly inside (0, 1)."""
    info = np.finfo(x.dtype if x.dtype in (np.float32, np.float64) else np.float32)
    with np.errstate(over="ignore"):
        y = 1.0 / (1.0 + np.exp(-x))
    return np.clip(y, info.tiny, 1.0 - info.epsneg).astype(x.dtype, copy=False)


def activation(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise KernelError(f"unknown activation {kind!r}")


def check_broadcast(a: np.ndarray, b: np.ndarray) -> None:
    """Accept identical shapes, or b as (n,1,h,w) / (n,c,1,1) against a (n,c,h,w)."""
    require_rank4(a, "left operand")
    require_rank4(b, "right operand")
    if a.shape == b.shape:
        return
    n, c, h, w = a.shape
    if b.shape in ((n, 1, h, w), (n, c, 1, 1)):
        return
    if b.shape[1] == 1:
        raise DimensionError(
            f"cannot expand {b.shape} across channels of {a.shape}",
            axis=_first_mismatch(a.shape, b.shape, skip=(1,)),
        )
    if b.shape[2:] == (1, 1):
        raise DimensionError(
            f"cannot expand {b.shape} across space of {a.shape}",
            axis=_first_mismatch(a.shape, b.shape, skip=(2, 3)),
        )
    raise DimensionError(
        f"incompatible operand shapes {a.shape} and {b.shape}",
        axis=_first_mismatch(a.shape, b.shape),
    )


def elementwise(a: np.ndarray, b: np.ndarray, kind: str) -> np.ndarray:
    check_broadcast(a, b)
    dtype = result_dtype(a, b)
    if kind == "add":
        return (a + b).astype(dtype, copy=False)
    if kind == "mul":
        return (a * b).astype(dtype, copy=False)
    raise KernelError(f"unknown elementwise kind {kind!r}")


def reduce_to_shape(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back onto the singleton axes of `shape`."""
    if grad.shape == shape:
        return grad
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    return grad.sum(axis=axes, keepdims=True)


def expand(x: np.ndarray, shape: Tuple[int, int, int, int]) -> np.ndarray:
    """Replicate a (n,1,h,w) map across channels or a (n,c,1,1) vector across space."""
    require_rank4(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x
    n, c, h, w = shape
    if x.shape not in ((n, 1, h, w), (n, c, 1, 1)):
        raise DimensionError(
            f"cannot expand {x.shape} to {shape}", axis=_first_mismatch(x.shape, shape)
        )
    return np.ascontiguousarray(np.broadcast_to(x, shape))


def concat_channels(tensors: Sequence[np.ndarray]) -> np.ndarray:
    if not tensors:
        raise KernelError("concat_channels needs at least one tensor")
    first = tensors[0]
    for t in tensors:
        require_rank4(t)
        if t.shape[0] != first.shape[0]:
            raise DimensionError(f"batch {t.shape[0]} != {first.shape[0]}", axis="batch")
        if t.shape[2] != first.shape[2]:
            raise DimensionError(f"height {t.shape[2]} != {first.shape[2]}", axis="height")
        if t.shape[3] != first.shape[3]:
            raise DimensionError(f"width {t.shape[3]} != {first.shape[3]}", axis="width")
    return np.concatenate(tensors, axis=1).astype(result_dtype(*tensors), copy=False)


# ─── Losses / tone curve ────────────────────────────────────────────────────

def l1_loss(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Mean absolute difference, returned as a 0-d array."""
    if a.shape != b.shape:
        raise DimensionError(
            f"l1_loss operands differ: {a.shape} vs {b.shape}",
            axis=_first_mismatch(a.shape, b.shape) if a.ndim == b.ndim else "rank",
        )
    diff = a.astype(np.float64) - b.astype(np.float64)
    return np.asarray(np.abs(diff).mean(), dtype=result_dtype(a, b))


def mu_law(x: np.ndarray, mu: float = 5000.0) -> np.ndarray:
    """log(1 + mu·x) / log(1 + mu); any shape, values must be >= 0."""
    x = np.asarray(x)
    if np.any(x < 0):
        raise KernelError(f"mu_law input must be non-negative, min is {float(x.min())}")
    dtype = result_dtype(x)
    out = np.log1p(mu * x.astype(np.float64)) / np.log1p(mu)
    return out.astype(dtype)


def mu_law_grad(x: np.ndarray, mu: float = 5000.0) -> np.ndarray:
    return mu / ((1.0 + mu * x.astype(np.float64)) * np.log1p(mu))
