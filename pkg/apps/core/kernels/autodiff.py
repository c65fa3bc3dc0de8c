"""
Reverse-mode differentiation over the kernels in ops.py.

A Tape records every primitive applied to Variables bound to it; backward()
replays the records in reverse and returns one gradient per watched
parameter. Variables without a tape (inference) skip recording entirely, so
the same graph code serves training and inference.

Usage:
    tape = Tape()
    w = tape.watch(weights["conv_E1.weight"], "conv_E1.weight")
    ...
    loss = ad.l1_loss(pred, target)
    grads = ad.backward(tape, loss)      # {"conv_E1.weight": ndarray, ...}
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from apps.core.errors import GradientError, KernelError
from apps.core.kernels import ops

Gradients = Dict[str, np.ndarray]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Variable:
    """A tensor value, optionally bound to the tape that produced it."""

    __slots__ = ("value", "tape", "name")

    def __init__(self, value: np.ndarray, tape: Optional["Tape"] = None, name: Optional[str] = None):
        self.value = np.asarray(value)
        self.tape = tape
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Variable(name={self.name!r}, shape={self.shape}, dtype={self.value.dtype})"


@dataclass
class TapeEntry:
    op: str
    inputs: Tuple[Variable, ...]
    output: Variable
    backward: BackwardFn


@dataclass
class Tape:
    """Ordered record of primitive applications. Single writer."""

    entries: List[TapeEntry] = field(default_factory=list)
    parameters: Dict[str, Variable] = field(default_factory=dict)

    def watch(self, value: np.ndarray, name: str) -> Variable:
        """Register a parameter; backward() returns a gradient for it."""
        if name in self.parameters:
            raise GradientError(f"parameter {name!r} is already watched")
        var = Variable(value, self, name)
        self.parameters[name] = var
        return var

    def constant(self, value: np.ndarray) -> Variable:
        """Bind a non-trainable value to this tape."""
        return Variable(value, self)

    def __len__(self) -> int:
        return len(self.entries)

    def __bool__(self) -> bool:
        # an empty tape is still a tape
        return True


def constant(value: np.ndarray) -> Variable:
    """Untaped value; operations on untaped inputs are not recorded."""
    return Variable(value)


def _record(op: str, inputs: Sequence[Variable], value: np.ndarray, backward: BackwardFn) -> Variable:
    tapes = {id(v.tape): v.tape for v in inputs if v.tape is not None}
    if not tapes:
        return Variable(value)
    if len(tapes) > 1:
        raise GradientError(f"{op}: inputs belong to different tapes")
    tape = next(iter(tapes.values()))
    out = Variable(value, tape)
    tape.entries.append(TapeEntry(op, tuple(inputs), out, backward))
    return out


def backward(tape: Tape, loss: Variable) -> Gradients:
    """Gradients of a scalar loss w.r.t. every watched parameter of `tape`.

    Parameters the loss does not depend on get zero gradients.
    """
    if loss.value.ndim != 0:
        raise GradientError(f"loss must be a scalar, got shape {loss.shape}")
    if loss.tape is not None and loss.tape is not tape:
        raise GradientError("loss was recorded on a different tape")

    adjoints: Dict[int, np.ndarray] = {id(loss): np.ones((), dtype=loss.value.dtype)}
    for entry in reversed(tape.entries):
        g = adjoints.pop(id(entry.output), None)
        if g is None:
            continue
        for inp, gi in zip(entry.inputs, entry.backward(g)):
            if gi is None or inp.tape is None:
                continue
            key = id(inp)
            adjoints[key] = adjoints[key] + gi if key in adjoints else gi

    grads: Gradients = {}
    for name, var in tape.parameters.items():
        g = adjoints.get(id(var))
        if g is None:
            g = np.zeros_like(var.value)
        grads[name] = np.asarray(g, dtype=var.value.dtype).reshape(var.shape)
    return grads


# ─── Recorded primitives ────────────────────────────────────────────────────

def conv2d(x: Variable, weight: Variable, bias: Variable, stride: int = 1,
           padding: int = 0, dilation: int = 1) -> Variable:
    out = ops.conv2d(x.value, weight.value, bias.value, stride, padding, dilation)

    def grad(g):
        return ops.conv2d_backward(x.value, weight.value, g, stride, padding, dilation)

    return _record("conv2d", (x, weight, bias), out, grad)


def pixel_shuffle(x: Variable, r: int) -> Variable:
    out = ops.pixel_shuffle(x.value, r)
    return _record("pixel_shuffle", (x,), out, lambda g: (ops.pixel_unshuffle(g, r),))


def pixel_unshuffle(x: Variable, r: int) -> Variable:
    out = ops.pixel_unshuffle(x.value, r)
    return _record("pixel_unshuffle", (x,), out, lambda g: (ops.pixel_shuffle(g, r),))


def global_avg_pool(x: Variable) -> Variable:
    out = ops.global_avg_pool(x.value)
    h, w = x.shape[2:]

    def grad(g):
        return (np.broadcast_to(g / (h * w), x.shape).astype(x.value.dtype),)

    return _record("global_avg_pool", (x,), out, grad)


def linear(x: Variable, weight: Variable, bias: Variable) -> Variable:
    out = ops.linear(x.value, weight.value, bias.value)

    def grad(g):
        g2 = g[:, :, 0, 0].astype(np.float64)
        x2 = x.value[:, :, 0, 0].astype(np.float64)
        dx = (g2 @ weight.value.astype(np.float64))[:, :, None, None]
        dw = g2.T @ x2
        db = g2.sum(axis=0)
        return dx.astype(x.value.dtype), dw.astype(weight.value.dtype), db.astype(bias.value.dtype)

    return _record("linear", (x, weight, bias), out, grad)


def relu(x: Variable) -> Variable:
    out = ops.relu(x.value)
    return _record("relu", (x,), out, lambda g: (g * (x.value > 0),))


def sigmoid(x: Variable) -> Variable:
    out = ops.sigmoid(x.value)
    return _record("sigmoid", (x,), out, lambda g: (g * out * (1 - out),))


def activation(x: Variable, kind: str) -> Variable:
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise KernelError(f"unknown activation {kind!r}")


def add(a: Variable, b: Variable) -> Variable:
    out = ops.elementwise(a.value, b.value, "add")

    def grad(g):
        return g, ops.reduce_to_shape(g, b.shape)

    return _record("add", (a, b), out, grad)


def mul(a: Variable, b: Variable) -> Variable:
    out = ops.elementwise(a.value, b.value, "mul")

    def grad(g):
        return g * b.value, ops.reduce_to_shape(g * a.value, b.shape)

    return _record("mul", (a, b), out, grad)


def elementwise(a: Variable, b: Variable, kind: str) -> Variable:
    if kind == "add":
        return add(a, b)
    if kind == "mul":
        return mul(a, b)
    raise KernelError(f"unknown elementwise kind {kind!r}")


def expand(x: Variable, shape: Tuple[int, int, int, int]) -> Variable:
    out = ops.expand(x.value, shape)
    return _record("expand", (x,), out, lambda g: (ops.reduce_to_shape(g, x.shape),))


def concat_channels(tensors: Sequence[Variable]) -> Variable:
    out = ops.concat_channels([t.value for t in tensors])
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])

    def grad(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(tensors)))

    return _record("concat_channels", tuple(tensors), out, grad)


def l1_loss(a: Variable, b: Variable) -> Variable:
    out = ops.l1_loss(a.value, b.value)
    count = a.value.size

    def grad(g):
        # np.sign(0) == 0
        s = np.sign(a.value.astype(np.float64) - b.value.astype(np.float64)) * (g / count)
        return s.astype(a.value.dtype), (-s).astype(b.value.dtype)

    return _record("l1_loss", (a, b), out, grad)


def mu_law(x: Variable, mu: float = 5000.0) -> Variable:
    out = ops.mu_law(x.value, mu)

    def grad(g):
        return ((g * ops.mu_law_grad(x.value, mu)).astype(x.value.dtype),)

    return _record("mu_law", (x,), out, grad)


def mean(x: Variable) -> Variable:
    out = np.asarray(x.value.astype(np.float64).mean(), dtype=x.value.dtype)
    count = x.value.size

    def grad(g):
        return (np.full(x.shape, g / count, dtype=x.value.dtype),)

    return _record("mean", (x,), out, grad)


def weighted_sum(terms: Sequence[Variable], coefficients: Sequence[float]) -> Variable:
    """Σ c_i · t_i over scalars."""
    if len(terms) != len(coefficients) or not terms:
        raise GradientError("weighted_sum needs one coefficient per term")
    for t in terms:
        if t.value.ndim != 0:
            raise GradientError(f"weighted_sum terms must be scalars, got shape {t.shape}")
    dtype = ops.result_dtype(*[t.value for t in terms])
    total = sum(float(c) * t.value.astype(np.float64) for c, t in zip(coefficients, terms))
    out = np.asarray(total, dtype=dtype)

    def grad(g):
        return tuple(np.asarray(g * c, dtype=t.value.dtype) for c, t in zip(coefficients, terms))

    return _record("weighted_sum", tuple(terms), out, grad)
