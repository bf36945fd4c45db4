"""Dense float64 tensors and the reverse-mode gradient tape."""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes violate an op's algebraic rule."""


class NumericalInstabilityError(ArithmeticError):
    """A NaN or infinity showed up where finite values are required."""


class OpKind(str, Enum):
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    DIV = "div"
    NEG = "neg"
    MATMUL = "matmul"
    SUM = "sum"
    MEAN = "mean"
    RESHAPE = "reshape"
    SWAPAXES = "swapaxes"
    FLIP = "flip"
    CONCAT = "concat"
    STACK = "stack"
    SLICE = "slice"
    EXP = "exp"
    LOG = "log"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    RELU = "relu"
    SILU = "silu"
    SOFTPLUS = "softplus"
    SOFTMAX = "softmax"
    LOG_SOFTMAX = "log_softmax"
    LAYER_NORM = "layer_norm"
    DROPOUT = "dropout"
    CONV1D = "conv1d"
    CONV_TRANSPOSE1D = "conv_transpose1d"
    FFT_REAL = "fft_real"
    GATE_GRADIENT = "gate_gradient"
    SSM_SCAN = "ssm_scan"
    CUSTOM = "custom"


# backward_fn maps d(loss)/d(output) to one gradient (or None) per input.
BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


@dataclass(frozen=True)
class TapeNode:
    op_kind: OpKind
    inputs: tuple["Tensor", ...]
    backward_fn: BackwardFn


_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar("grad_enabled", default=True)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Stop recording tape nodes inside the block."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


class Tensor:
    """An n-dimensional float64 array, optionally tracked on the gradient tape."""

    # Lets `ndarray + Tensor` dispatch to Tensor.__radd__.
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, node: TapeNode | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.node = node

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def T(self) -> "Tensor":
        return self.swapaxes(-1, -2)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # Operator sugar; the implementations live in ops.py.

    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)

    def sum(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def swapaxes(self, axis1: int, axis2: int):
        from . import ops
        return ops.swapaxes(self, axis1, axis2)


def apply_op(
    data: np.ndarray,
    op_kind: OpKind,
    inputs: Sequence[Tensor],
    backward_fn: BackwardFn,
) -> Tensor:
    """Wrap an op result, recording a tape node when any input needs gradient."""
    needs_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=needs_grad)
    if needs_grad:
        out.node = TapeNode(op_kind, tuple(inputs), backward_fn)
    return out


def _topological_order(root: Tensor) -> list[Tensor]:
    """Post-order over the tape: every tensor appears after its inputs."""
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in visited:
            continue
        visited.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            for parent in reversed(t.node.inputs):
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate `.grad` on every requires_grad tensor that `loss` depends on.

    Gradients accumulate into existing `.grad` buffers; call `zero_grad` on
    parameters between steps.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss is not connected to any tensor that requires gradient")

    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for t in reversed(_topological_order(loss)):
        g = pending.pop(id(t), None)
        if g is None:
            continue
        t.grad = g.copy() if t.grad is None else t.grad + g
        if t.node is None:
            continue
        for parent, pg in zip(t.node.inputs, t.node.backward_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            if pg.shape != parent.shape:
                raise ShapeError(
                    f"{t.node.op_kind.value} backward produced gradient {pg.shape} "
                    f"for an input of shape {parent.shape}"
                )
            key = id(parent)
            pending[key] = pg if key not in pending else pending[key] + pg
