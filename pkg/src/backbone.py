"""Frozen pre-norm transformer encoder with deep prompt injection.

Stands in for the pretrained speech encoder: its weights are drawn once from a
seed and never receive gradient. At every layer the layer's prompt rows are
placed in front of the running feature sequence; the prompt outputs of
intermediate layers are discarded and replaced by the next layer's prompt.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, ops
from .rng import rng_stream
from .wavelet_prompt import FilterBank, PromptSet, SparsifyConfig

logger = logging.getLogger("wavesp")

LAYER_WEIGHTS = ("wq", "wk", "wv", "wo", "w1", "w2")
LAYER_VECTORS = ("ln1_g", "ln1_b", "bq", "bk", "bv", "bo", "ln2_g", "ln2_b", "b1", "b2")


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 4
    d: int = 64
    heads: int = 4
    ff: int = 128
    seed: int = 1234
    # Nominal size of the frozen waveform feature extractor; only used for accounting.
    extractor_params: int = 0

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError(f"encoder needs at least one layer, got {self.layers}")
        if self.d % 2:
            raise ValueError(f"encoder width d must be even, got {self.d}")
        if self.heads < 1 or self.d % self.heads:
            raise ValueError(f"encoder width d={self.d} is not divisible by heads={self.heads}")
        if self.ff < 1:
            raise ValueError(f"feed-forward width must be positive, got {self.ff}")

    def parameter_count(self) -> int:
        """Frozen encoder parameters, excluding the nominal extractor."""
        d, ff = self.d, self.ff
        per_layer = 4 * d * d + 4 * d + 2 * d * ff + ff + d + 4 * d
        return self.layers * per_layer


def sinusoidal_positions(length: int, d: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    freq = np.exp(-np.log(10000.0) * np.arange(0, d, 2) / d)[None, :]
    table = np.zeros((length, d))
    table[:, 0::2] = np.sin(pos * freq)
    table[:, 1::2] = np.cos(pos * freq)
    return table


class EncoderLayer:
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        d, ff = cfg.d, cfg.ff
        fan_in = {"wq": d, "wk": d, "wv": d, "wo": d, "w1": d, "w2": ff}
        shapes = {"wq": (d, d), "wk": (d, d), "wv": (d, d), "wo": (d, d), "w1": (d, ff), "w2": (ff, d)}
        self.weights = {
            name: Tensor(rng.standard_normal(shapes[name]) / np.sqrt(fan_in[name]))
            for name in LAYER_WEIGHTS
        }
        sizes = {"b1": ff}
        self.weights.update(
            {
                name: Tensor(np.ones(d) if name.endswith("_g") else np.zeros(sizes.get(name, d)))
                for name in LAYER_VECTORS
            }
        )
        self.heads = cfg.heads

    def __call__(self, x: Tensor, dropout: float, train: bool, rng: np.random.Generator | None) -> Tensor:
        w = self.weights
        batch, seq, d = x.shape
        dh = d // self.heads

        h = ops.layer_norm(x, w["ln1_g"], w["ln1_b"])

        def split_heads(t: Tensor) -> Tensor:
            return ops.swapaxes(ops.reshape(t, (batch, seq, self.heads, dh)), 1, 2)

        q = split_heads(h @ w["wq"] + w["bq"])
        k = split_heads(h @ w["wk"] + w["bk"])
        v = split_heads(h @ w["wv"] + w["bv"])
        att = ops.softmax((q @ ops.swapaxes(k, -1, -2)) * (1.0 / np.sqrt(dh)), axis=-1)
        ctx = ops.reshape(ops.swapaxes(att @ v, 1, 2), (batch, seq, d))
        x = x + ops.dropout(ctx @ w["wo"] + w["bo"], dropout, rng, train)

        h = ops.layer_norm(x, w["ln2_g"], w["ln2_b"])
        ff = ops.silu(h @ w["w1"] + w["b1"]) @ w["w2"] + w["b2"]
        return x + ops.dropout(ff, dropout, rng, train)


class FrozenEncoder:
    """Randomly initialised encoder whose tensors never require gradient."""

    def __init__(self, cfg: EncoderConfig):
        self.cfg = cfg
        rng = rng_stream(cfg.seed, "backbone")
        self.layers = [EncoderLayer(cfg, rng) for _ in range(cfg.layers)]
        logger.debug(f"Frozen encoder: {cfg.layers} layers, d={cfg.d}, seed={cfg.seed}")

    def parameters(self) -> list[Tensor]:
        return [t for layer in self.layers for t in layer.weights.values()]

    def parameter_count(self) -> int:
        return sum(t.size for t in self.parameters())

    def snapshot(self) -> list[np.ndarray]:
        return [t.data.copy() for t in self.parameters()]

    def layer_outputs(
        self,
        features: Tensor,
        prompts: PromptSet,
        bank: FilterBank,
        sparsify: SparsifyConfig,
        train: bool = False,
        rng: np.random.Generator | None = None,
        component: str = "full",
        dropout: float = 0.0,
        dropout_rng: np.random.Generator | None = None,
    ) -> list[Tensor]:
        """[Z_k, E_k] after every layer k.

        `features` is T x d or batch x T x d; every output keeps the same rank with
        p + T rows. Z_k is dropped before layer k + 1, which sees a fresh prompt.
        """
        cfg = self.cfg
        if features.shape[-1] != cfg.d or prompts.d != cfg.d:
            raise ValueError(
                f"width mismatch: features {features.shape}, prompts d={prompts.d}, encoder d={cfg.d}"
            )
        if len(prompts.layers) != cfg.layers:
            raise ValueError(f"{len(prompts.layers)} prompt layers for a {cfg.layers}-layer encoder")
        squeeze = features.ndim == 2
        if squeeze:
            features = ops.reshape(features, (1,) + features.shape)
        if features.ndim != 3:
            raise ValueError(f"features must be T x d or batch x T x d, got {features.shape}")
        batch, steps, d = features.shape
        p = prompts.p

        hidden = features + sinusoidal_positions(steps, d)
        outputs = []
        for k, layer in enumerate(self.layers):
            prompt = prompts.enhanced(k, bank, sparsify, train, rng, component)
            tokens = ops.broadcast_to(prompt, (batch, p, d))
            out = layer(ops.concat([tokens, hidden], axis=1), dropout, train, dropout_rng)
            hidden = out[:, p:]
            outputs.append(out[0] if squeeze else out)
        return outputs

    def encode_with_prompts(self, features: Tensor, prompts: PromptSet, *args, **kwargs) -> Tensor:
        """Run [P~_k, E_{k-1}] through every layer and return I = [Z_l, E_l].

        Arguments are those of `layer_outputs`.
        """
        return self.layer_outputs(features, prompts, *args, **kwargs)[-1]
