"""Adam over an explicit list of trainable tensors."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .autodiff import NumericalInstabilityError, Tensor


class Adam:
    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 5e-4,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        frozen = [i for i, p in enumerate(params) if not p.requires_grad]
        if frozen:
            raise ValueError(f"optimizer received frozen tensors at positions {frozen}")
        if len({id(p) for p in params}) != len(params):
            raise ValueError("optimizer received the same tensor twice")
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise NumericalInstabilityError(f"non-finite gradient at optimizer step {self.t}")
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_size(self) -> int:
        """Number of scalars held per moment buffer; equals the trainable count."""
        return sum(m.size for m in self.m)

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {"t": np.array(self.t)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            state[f"m.{i}"] = m.copy()
            state[f"v.{i}"] = v.copy()
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        self.t = int(state["t"])
        for i in range(len(self.params)):
            if state[f"m.{i}"].shape != self.m[i].shape:
                raise ValueError(f"moment {i}: expected shape {self.m[i].shape}, got {state[f'm.{i}'].shape}")
            self.m[i][...] = state[f"m.{i}"]
            self.v[i][...] = state[f"v.{i}"]
