"""Central finite-difference check of tape gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import NumericalInstabilityError, Tensor, backward, no_grad


def _scalar(f: Callable[[], Tensor]) -> float:
    with no_grad():
        value = float(f().data.reshape(-1)[0])
    if not np.isfinite(value):
        raise NumericalInstabilityError(f"objective evaluated to {value} during finite differencing")
    return value


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-5) -> float:
    """Return the worst relative error between tape and numeric gradients.

    `f` rebuilds the scalar objective from scratch on every call and must be
    deterministic (seed any RNG inside it). The error for one entry is
    |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError(f"eps must lie in (0, 1e-2], got {eps}")
    for p in params:
        p.zero_grad()
    loss = f()
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, grad in zip(params, analytic):
        if not np.all(np.isfinite(grad)):
            raise NumericalInstabilityError(f"non-finite analytic gradient for {p!r}")
        flat = p.data.reshape(-1)
        if not np.shares_memory(flat, p.data):
            raise ValueError("grad_check needs contiguous parameter buffers")
        for i, a in enumerate(grad.reshape(-1)):
            original = flat[i]
            flat[i] = original + eps
            upper = _scalar(f)
            flat[i] = original - eps
            lower = _scalar(f)
            flat[i] = original
            numeric = (upper - lower) / (2.0 * eps)
            worst = max(worst, abs(a - numeric) / max(1.0, abs(a), abs(numeric)))
    for p in params:
        p.zero_grad()
    return worst
