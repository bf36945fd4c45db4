from .tensor import (
    NumericalInstabilityError,
    OpKind,
    ShapeError,
    TapeNode,
    Tensor,
    apply_op,
    backward,
    is_grad_enabled,
    no_grad,
)
from .gradcheck import grad_check
from . import ops
from .ops import tensor, as_tensor

__all__ = [
    "NumericalInstabilityError",
    "OpKind",
    "ShapeError",
    "TapeNode",
    "Tensor",
    "apply_op",
    "as_tensor",
    "backward",
    "grad_check",
    "is_grad_enabled",
    "no_grad",
    "ops",
    "tensor",
]
