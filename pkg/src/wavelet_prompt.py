"""Wavelet-domain enhancement of prompt tokens.

A one-level learnable DWT runs along the hidden axis of each prompt token
(periodic boundary), a random subset of coefficient positions is kept on the
gradient tape, and learnable synthesis filters rebuild the token. The last `m`
tokens of each layer's prompt are replaced by the rebuilt ones.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pywt

from .autodiff import Tensor, ops

VARIANTS = ("PT", "FourierPT", "WPT", "WSPT", "PartialWSPT")
WAVELET_VARIANTS = ("WPT", "WSPT", "PartialWSPT")
COMPONENTS = ("full", "no_lwd", "no_wds", "no_lwr")
SPARSIFY_MODES = ("gate", "zero")
FILTER_NAMES = ("f0", "f1", "h0", "h1")


class FilterBank:
    """Analysis (f0, f1) and synthesis (h0, h1) filters of one two-channel bank."""

    def __init__(self, f0, f1, h0, h1, learnable: bool = True):
        arrays = [np.array(c, dtype=np.float64) for c in (f0, f1, h0, h1)]
        lengths = {a.shape for a in arrays}
        if len(lengths) != 1 or arrays[0].ndim != 1:
            raise ValueError(f"all four filters must be 1-D of one length, got {[a.shape for a in arrays]}")
        taps = arrays[0].shape[0]
        if taps < 2 or taps % 2:
            raise ValueError(f"filter length must be even and >= 2, got {taps}")
        self.learnable = learnable
        self.f0, self.f1, self.h0, self.h1 = (Tensor(a, requires_grad=learnable) for a in arrays)

    @classmethod
    def from_family(cls, family: str = "haar", learnable: bool = True) -> "FilterBank":
        """Initialise from an orthogonal library wavelet (synthesis = analysis)."""
        try:
            wavelet = pywt.Wavelet(family)
        except ValueError:
            raise ValueError(f"Unknown wavelet family: {family}") from None
        if not wavelet.orthogonal:
            raise ValueError(f"wavelet {family!r} is not orthogonal; perfect reconstruction needs h = f")
        lo, hi = np.array(wavelet.rec_lo), np.array(wavelet.rec_hi)
        return cls(lo, hi, lo.copy(), hi.copy(), learnable=learnable)

    @property
    def length(self) -> int:
        return self.f0.shape[0]

    def tensors(self) -> list[Tensor]:
        return [self.f0, self.f1, self.h0, self.h1]

    def parameters(self) -> list[Tensor]:
        return self.tensors() if self.learnable else []

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in zip(FILTER_NAMES, self.tensors())}

    def load(self, arrays: dict[str, np.ndarray]) -> None:
        for name, t in zip(FILTER_NAMES, self.tensors()):
            if arrays[name].shape != t.shape:
                raise ValueError(f"filter {name}: expected shape {t.shape}, got {arrays[name].shape}")
            t.data[...] = arrays[name]

    def perturbed(self, scale: float, rng: np.random.Generator) -> "FilterBank":
        """Copy with i.i.d. Gaussian noise of standard deviation `scale` on every tap."""
        noisy = {k: v + scale * rng.standard_normal(v.shape) for k, v in self.snapshot().items()}
        return FilterBank(**noisy, learnable=self.learnable)


@dataclass(frozen=True)
class SparsifyConfig:
    rho: float = 0.1
    enabled: bool = True
    stream: str = "sparsify"
    mode: str = "gate"

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"sparsity ratio rho must lie in [0, 1], got {self.rho}")
        if self.mode not in SPARSIFY_MODES:
            raise ValueError(f"Unknown sparsify mode: {self.mode}. Must be one of {SPARSIFY_MODES}")


def lwd(tokens: Tensor, bank: FilterBank) -> tuple[Tensor, Tensor]:
    """One-level analysis along the hidden axis: (approximation, detail), each d/2 wide."""
    d = tokens.shape[-1]
    if d % 2:
        raise ValueError(f"wavelet decomposition needs an even hidden size, got {d}")
    ca = ops.conv1d(tokens, bank.f0, stride=2, padding="periodic")
    cd = ops.conv1d(tokens, bank.f1, stride=2, padding="periodic")
    return ca, cd


def _apply_mask(coeffs: Tensor, mask: np.ndarray, mode: str) -> Tensor:
    if mode == "zero":
        return ops.mul(coeffs, mask)
    return ops.gate_gradient(coeffs, mask)


def wds(
    ca: Tensor,
    cd: Tensor,
    cfg: SparsifyConfig,
    train: bool,
    rng: np.random.Generator | None = None,
) -> tuple[Tensor, Tensor, np.ndarray]:
    """Keep a Bernoulli(rho) subset of the stacked coefficient positions on the tape.

    Returns the two bands and the mask over [cA | cD]. Outside training, or with
    sparsification disabled, the bands pass through unchanged with an all-ones mask.
    """
    if not 0.0 <= cfg.rho <= 1.0:
        raise ValueError(f"sparsity ratio rho must lie in [0, 1], got {cfg.rho}")
    half = ca.shape[-1]
    stacked = ca.shape[:-1] + (2 * half,)
    if not train or not cfg.enabled:
        return ca, cd, np.ones(stacked)
    if rng is None:
        raise ValueError("train-mode sparsification needs an RNG stream")
    mask = (rng.random(stacked) < cfg.rho).astype(np.float64)
    return (
        _apply_mask(ca, mask[..., :half], cfg.mode),
        _apply_mask(cd, mask[..., half:], cfg.mode),
        mask,
    )


def lwr(ca: Tensor, cd: Tensor, bank: FilterBank) -> Tensor:
    """Synthesis: upsample both bands by two, filter with h0/h1 and sum."""
    if ca.shape != cd.shape:
        raise ValueError(f"approximation {ca.shape} and detail {cd.shape} bands must match")
    d = 2 * ca.shape[-1]
    low = ops.conv_transpose1d(ca, bank.h0, stride=2, out_len=d)
    high = ops.conv_transpose1d(cd, bank.h1, stride=2, out_len=d)
    return ops.add(low, high)


def wavelet_sparse_prompt(
    tokens: Tensor,
    bank: FilterBank,
    cfg: SparsifyConfig,
    train: bool,
    rng: np.random.Generator | None = None,
    component: str = "full",
) -> Tensor:
    """Decompose, sparsify and rebuild `tokens` (m x d); shape is preserved.

    `component` removes one stage for ablation runs:
      no_lwd  sparsify the raw tokens as a single band and rebuild with h0 at stride 1
      no_wds  skip sparsification
      no_lwr  hand back [cA | cD] unchanged instead of learned synthesis
    """
    if component not in COMPONENTS:
        raise ValueError(f"Unknown component: {component}. Must be one of {COMPONENTS}")
    if component == "no_wds":
        cfg = dataclasses.replace(cfg, enabled=False)

    if component == "no_lwd":
        band = tokens
        if train and cfg.enabled:
            if rng is None:
                raise ValueError("train-mode sparsification needs an RNG stream")
            mask = (rng.random(band.shape) < cfg.rho).astype(np.float64)
            band = _apply_mask(band, mask, cfg.mode)
        return ops.conv_transpose1d(band, bank.h0, stride=1, out_len=tokens.shape[-1])

    ca, cd = lwd(tokens, bank)
    ca, cd, _ = wds(ca, cd, cfg, train, rng)
    if component == "no_lwr":
        return ops.concat([ca, cd], axis=-1)
    return lwr(ca, cd, bank)


def assemble_prompt(prompt: Tensor, wsp: Tensor) -> Tensor:
    """Replace the last m rows of a p x d prompt with the m enhanced rows."""
    p, d = prompt.shape
    m = wsp.shape[0]
    if wsp.ndim != 2 or wsp.shape[1] != d or m > p:
        raise ValueError(f"cannot place enhanced tokens {wsp.shape} into a prompt of shape {prompt.shape}")
    if m == 0:
        return prompt
    if m == p:
        return wsp
    return ops.concat([prompt[: p - m], wsp], axis=0)


def fourier_prompt(prompt: Tensor) -> Tensor:
    """Real part of the 2-D DFT over (token, hidden) axes."""
    return ops.fft_real(prompt, axes=(-2, -1))


def pr_penalty(bank: FilterBank, basis_len: int = 8) -> Tensor:
    """Squared round-trip error over the canonical basis of length `basis_len`.

    Zero exactly when the bank reconstructs every basis vector.
    """
    if basis_len < 2 or basis_len % 2:
        raise ValueError(f"basis length must be even and >= 2, got {basis_len}")
    basis = Tensor(np.eye(basis_len))
    ca, cd = lwd(basis, bank)
    residual = ops.sub(lwr(ca, cd, bank), basis)
    return ops.sum(ops.mul(residual, residual))


def check_layout(p: int, m: int, variant: str) -> None:
    """Validate the (p, m, variant) combination."""
    if variant not in VARIANTS:
        raise ValueError(f"Unknown prompt variant: {variant}. Must be one of {VARIANTS}")
    if p < 1:
        raise ValueError(f"prompt length p must be positive, got {p}")
    if not 0 <= m <= p:
        raise ValueError(f"enhanced token count m={m} must lie in [0, {p}]")
    if variant == "PartialWSPT" and not 0 < m < p:
        raise ValueError(f"PartialWSPT needs 0 < m < p, got m={m}, p={p}")
    if variant in ("WPT", "WSPT") and m != p:
        raise ValueError(f"{variant} enhances every token, so m must equal p={p}, got {m}")


class PromptSet:
    """Per-layer prompt matrices P_k (p x d) and the enhancement variant."""

    def __init__(self, layers: Sequence[Tensor], m: int, variant: str):
        if variant not in VARIANTS:
            raise ValueError(f"Unknown prompt variant: {variant}. Must be one of {VARIANTS}")
        if not layers:
            raise ValueError("a prompt set needs at least one layer")
        shape = layers[0].shape
        if len(shape) != 2 or any(t.shape != shape for t in layers):
            raise ValueError(f"every layer prompt must share one p x d shape, got {[t.shape for t in layers]}")
        check_layout(shape[0], m, variant)
        self.layers = list(layers)
        self.m = m
        self.variant = variant

    @classmethod
    def initialise(
        cls, n_layers: int, p: int, d: int, m: int, variant: str, rng: np.random.Generator
    ) -> "PromptSet":
        """Xavier-uniform prompt tokens, one matrix per layer."""
        bound = np.sqrt(6.0 / (p + d))
        layers = [Tensor(rng.uniform(-bound, bound, (p, d)), requires_grad=True) for _ in range(n_layers)]
        return cls(layers, m, variant)

    @property
    def p(self) -> int:
        return self.layers[0].shape[0]

    @property
    def d(self) -> int:
        return self.layers[0].shape[1]

    def parameters(self) -> list[Tensor]:
        return list(self.layers)

    def enhanced(
        self,
        k: int,
        bank: FilterBank,
        cfg: SparsifyConfig,
        train: bool,
        rng: np.random.Generator | None = None,
        component: str = "full",
    ) -> Tensor:
        """P~_k for layer k under the active variant."""
        prompt = self.layers[k]
        if self.variant == "PT":
            return prompt
        if self.variant == "FourierPT":
            return fourier_prompt(prompt)
        if self.variant == "WPT":
            cfg = dataclasses.replace(cfg, enabled=False)
        p = self.p
        wsp = wavelet_sparse_prompt(prompt[p - self.m :], bank, cfg, train, rng, component)
        return assemble_prompt(prompt, wsp)
