"""Bidirectional selective state-space classification head.

Each block scans the sequence forwards and backwards with input-dependent
step size and projections (diagonal, zero-order-hold discretisation), gates
both directions, mixes channels and adds the residual. The stack is mean-pooled
and a linear head emits (bonafide, spoof) logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import OpKind, Tensor, apply_op, ops

# Running count of multiply-adds performed by ssm_scan.
scan_stats = {"calls": 0, "flops": 0}

DIRECTION_PARAMS = ("w_in", "w_z", "w_delta", "b_delta", "w_b", "w_c", "a_log", "d_skip")


@dataclass(frozen=True)
class ClassifierConfig:
    blocks: int = 4
    d_state: int = 8
    d_model: int = 64
    pool: str = "mean"
    classes: int = 2

    def __post_init__(self):
        if self.blocks < 1:
            raise ValueError(f"classifier needs at least one block, got {self.blocks}")
        if self.d_state < 1 or self.d_model < 1:
            raise ValueError(f"d_state and d_model must be positive, got {self.d_state}, {self.d_model}")
        if self.pool != "mean":
            raise ValueError(f"Unknown pooling: {self.pool}. Only 'mean' is supported")
        if self.classes != 2:
            raise ValueError(f"the head is binary (bonafide, spoof), got classes={self.classes}")

    def parameter_count(self, d_in: int) -> int:
        dm, n = self.d_model, self.d_state
        direction = 3 * dm * dm + dm + 3 * dm * n + dm
        block = 2 * dm + 2 * direction + dm * dm + dm
        return d_in * dm + dm + self.blocks * block + 2 * dm + dm * self.classes + self.classes


def ssm_scan(u: Tensor, delta: Tensor, a: Tensor, b: Tensor, c: Tensor, d_skip: Tensor) -> Tensor:
    """Diagonal selective recurrence, computed as one sequential scan.

        h_t = exp(delta_t * A) * h_{t-1} + delta_t * B_t * u_t,   h_0 = 0
        y_t = C_t . h_t + D * u_t

    Shapes: u, delta (batch, T, d); A (d, N); B, C (batch, T, N); D (d,).
    Unbatched (T, d) / (T, N) inputs are accepted and return (T, d).
    """
    if u.ndim == 2:
        lift = lambda t: ops.reshape(t, (1,) + t.shape)  # noqa: E731
        return ssm_scan(lift(u), lift(delta), a, lift(b), lift(c), d_skip)[0]
    if u.ndim != 3:
        raise ValueError(f"scan input must be (T, d) or (batch, T, d), got {u.shape}")
    batch, steps, d = u.shape
    if steps < 1:
        raise ValueError("cannot scan an empty sequence")
    n = a.shape[-1]
    if delta.shape != u.shape or a.shape != (d, n) or b.shape != (batch, steps, n) or c.shape != b.shape:
        raise ValueError(
            f"scan shapes disagree: u {u.shape}, delta {delta.shape}, A {a.shape}, B {b.shape}, C {c.shape}"
        )
    if d_skip.shape != (d,):
        raise ValueError(f"skip coefficient D must be ({d},), got {d_skip.shape}")

    uu, dt, aa, bb, cc = u.data, delta.data, a.data, b.data, c.data
    decay = np.exp(dt[..., None] * aa)  # (batch, T, d, N)
    drive = dt[..., None] * bb[:, :, None, :] * uu[..., None]
    states = np.empty_like(decay)
    h = np.zeros((batch, d, n))
    for t in range(steps):
        h = decay[:, t] * h + drive[:, t]
        states[:, t] = h
    y = np.einsum("btdn,btn->btd", states, cc) + d_skip.data * uu
    scan_stats["calls"] += 1
    scan_stats["flops"] += 3 * batch * steps * d * n

    def backward_fn(g):
        g_states = np.empty_like(states)
        carry = np.zeros((batch, d, n))
        for t in range(steps - 1, -1, -1):
            carry = carry + g[:, t, :, None] * cc[:, t, None, :]
            g_states[:, t] = carry
            carry = decay[:, t] * carry
        previous = np.concatenate([np.zeros((batch, 1, d, n)), states[:, :-1]], axis=1)
        g_decay = g_states * previous * decay
        g_drive = g_states
        g_delta = (g_decay * aa).sum(-1) + (g_drive * bb[:, :, None, :] * uu[..., None]).sum(-1)
        g_a = (g_decay * dt[..., None]).sum(axis=(0, 1))
        g_b = (g_drive * dt[..., None] * uu[..., None]).sum(axis=2)
        g_u = (g_drive * dt[..., None] * bb[:, :, None, :]).sum(-1) + g * d_skip.data
        g_c = np.einsum("btd,btdn->btn", g, states)
        g_d = (g * uu).sum(axis=(0, 1))
        return g_u, g_delta, g_a, g_b, g_c, g_d

    return apply_op(y, OpKind.SSM_SCAN, (u, delta, a, b, c, d_skip), backward_fn)


class SSMBlockParams:
    """Parameters of one scan direction."""

    def __init__(self, d: int, d_state: int, rng: np.random.Generator):
        scale = 1.0 / np.sqrt(d)
        dt = np.exp(rng.uniform(np.log(1e-3), np.log(1e-1), d))
        self.w_in = Tensor(rng.standard_normal((d, d)) * scale, requires_grad=True)
        self.w_z = Tensor(rng.standard_normal((d, d)) * scale, requires_grad=True)
        self.w_delta = Tensor(rng.standard_normal((d, d)) * scale * 0.1, requires_grad=True)
        # Inverse softplus, so the initial step sizes are log-uniform in [1e-3, 1e-1].
        self.b_delta = Tensor(dt + np.log(-np.expm1(-dt)), requires_grad=True)
        self.w_b = Tensor(rng.standard_normal((d, d_state)) * scale, requires_grad=True)
        self.w_c = Tensor(rng.standard_normal((d, d_state)) * scale, requires_grad=True)
        self.a_log = Tensor(np.log(np.tile(np.arange(1, d_state + 1, dtype=np.float64), (d, 1))), requires_grad=True)
        self.d_skip = Tensor(np.ones(d), requires_grad=True)

    @property
    def a(self) -> Tensor:
        """State matrix entries, A = -exp(a_log) < 0."""
        return ops.neg(ops.exp(self.a_log))

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        return [(name, getattr(self, name)) for name in DIRECTION_PARAMS]


def selective_scan(u: Tensor, params: SSMBlockParams) -> Tensor:
    """Scan `u` with step size, B and C computed from `u` itself."""
    if u.shape[-2] < 1:
        raise ValueError("cannot scan an empty sequence")
    delta = ops.softplus(u @ params.w_delta + params.b_delta)
    b = u @ params.w_b
    c = u @ params.w_c
    return ssm_scan(u, delta, params.a, b, c, params.d_skip)


class BiSSMBlock:
    def __init__(self, d: int, d_state: int, rng: np.random.Generator):
        self.norm_g = Tensor(np.ones(d), requires_grad=True)
        self.norm_b = Tensor(np.zeros(d), requires_grad=True)
        self.fwd = SSMBlockParams(d, d_state, rng)
        self.bwd = SSMBlockParams(d, d_state, rng)
        self.w_out = Tensor(rng.standard_normal((d, d)) / np.sqrt(d), requires_grad=True)
        self.b_out = Tensor(np.zeros(d), requires_grad=True)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        named = [("norm_g", self.norm_g), ("norm_b", self.norm_b)]
        named += [(f"fwd.{n}", t) for n, t in self.fwd.named_parameters()]
        named += [(f"bwd.{n}", t) for n, t in self.bwd.named_parameters()]
        named += [("w_out", self.w_out), ("b_out", self.b_out)]
        return named


def _gated_scan(x: Tensor, params: SSMBlockParams) -> Tensor:
    return ops.mul(selective_scan(x @ params.w_in, params), ops.silu(x @ params.w_z))


def bidirectional_block(
    u: Tensor,
    block: BiSSMBlock,
    dropout: float = 0.0,
    train: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """u + mix(gate(scan_fwd(x)) + reverse(gate(scan_bwd(reverse(x))))), x = norm(u)."""
    x = ops.layer_norm(u, block.norm_g, block.norm_b)
    forward = _gated_scan(x, block.fwd)
    backward = ops.flip(_gated_scan(ops.flip(x, axis=-2), block.bwd), axis=-2)
    mixed = (forward + backward) @ block.w_out + block.b_out
    return u + ops.dropout(mixed, dropout, rng, train)


class SSMClassifier:
    """Input projection, a stack of bidirectional blocks, mean pooling, linear head."""

    def __init__(self, cfg: ClassifierConfig, d_in: int, rng: np.random.Generator):
        dm = cfg.d_model
        self.cfg = cfg
        self.w_proj = Tensor(rng.standard_normal((d_in, dm)) / np.sqrt(d_in), requires_grad=True)
        self.b_proj = Tensor(np.zeros(dm), requires_grad=True)
        self.blocks = [BiSSMBlock(dm, cfg.d_state, rng) for _ in range(cfg.blocks)]
        self.norm_g = Tensor(np.ones(dm), requires_grad=True)
        self.norm_b = Tensor(np.zeros(dm), requires_grad=True)
        self.w_head = Tensor(rng.standard_normal((dm, cfg.classes)) / np.sqrt(dm), requires_grad=True)
        self.b_head = Tensor(np.zeros(cfg.classes), requires_grad=True)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        named = [("w_proj", self.w_proj), ("b_proj", self.b_proj)]
        for i, block in enumerate(self.blocks):
            named += [(f"block{i}.{n}", t) for n, t in block.named_parameters()]
        named += [
            ("norm_g", self.norm_g),
            ("norm_b", self.norm_b),
            ("w_head", self.w_head),
            ("b_head", self.b_head),
        ]
        return named

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def embed(
        self,
        encoded: Tensor,
        dropout: float = 0.0,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Pooled penultimate representation, d_model wide per sequence."""
        if encoded.shape[-2] < 1:
            raise ValueError("cannot classify an empty sequence")
        h = encoded @ self.w_proj + self.b_proj
        for block in self.blocks:
            h = bidirectional_block(h, block, dropout, train, rng)
        h = ops.layer_norm(h, self.norm_g, self.norm_b)
        return ops.mean(h, axis=-2)

    def classify(
        self,
        encoded: Tensor,
        dropout: float = 0.0,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """(bonafide, spoof) logits for I = [Z_l, E_l]; (p+T) x d or batch x (p+T) x d."""
        pooled = ops.dropout(self.embed(encoded, dropout, train, rng), dropout, rng, train)
        if pooled.ndim == 1:
            return (ops.reshape(pooled, (1, -1)) @ self.w_head + self.b_head)[0]
        return pooled @ self.w_head + self.b_head


def scores(logits: Tensor) -> np.ndarray:
    """Detection score: bonafide logit minus spoof logit."""
    return logits.data[..., 0] - logits.data[..., 1]
