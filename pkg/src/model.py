"""WaveSP-Net: frozen prompted encoder plus state-space classifier."""

from __future__ import annotations

import logging

import numpy as np

from .autodiff import Tensor, ops
from .backbone import FrozenEncoder
from .config import ExperimentConfig
from .rng import rng_stream
from .ssm_classifier import SSMClassifier, scores
from .wavelet_prompt import FILTER_NAMES, WAVELET_VARIANTS, FilterBank, PromptSet, SparsifyConfig, pr_penalty

logger = logging.getLogger("wavesp")

BONAFIDE, SPOOF = 0, 1
CLASS_INDEX = {"bonafide": BONAFIDE, "spoof": SPOOF}


def uses_filter_bank(cfg: ExperimentConfig) -> bool:
    return cfg.prompt.variant in WAVELET_VARIANTS


def filters_trainable(cfg: ExperimentConfig) -> bool:
    return uses_filter_bank(cfg) and cfg.wavelet.filters == "learnable"


class WaveSPNet:
    def __init__(self, cfg: ExperimentConfig):
        cfg.validate()
        self.cfg = cfg
        enc, pc = cfg.encoder, cfg.prompt
        self.encoder = FrozenEncoder(enc)
        self.prompts = PromptSet.initialise(
            enc.layers, pc.p, enc.d, pc.m, pc.variant, rng_stream(cfg.seed, "prompts")
        )
        self.bank = FilterBank.from_family(cfg.wavelet.family, learnable=filters_trainable(cfg))
        self.classifier = SSMClassifier(cfg.classifier, enc.d, rng_stream(cfg.seed, "classifier"))
        self.sparsify = SparsifyConfig(rho=cfg.wavelet.rho, mode=cfg.wavelet.sparsify_mode)

    # ── Parameters ────────────────────────────────────────────────────────────

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        """Every prompt, filter and classifier tensor, trainable or not."""
        named = [(f"prompt.{k}", t) for k, t in enumerate(self.prompts.parameters())]
        if uses_filter_bank(self.cfg):
            named += [(f"bank.{n}", t) for n, t in zip(FILTER_NAMES, self.bank.tensors())]
        named += [(f"classifier.{n}", t) for n, t in self.classifier.named_parameters()]
        return named

    def named_trainable(self) -> list[tuple[str, Tensor]]:
        return [(n, t) for n, t in self.named_tensors() if t.requires_grad]

    def trainable_parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_trainable()]

    def frozen_parameters(self) -> list[Tensor]:
        return self.encoder.parameters() + [t for _, t in self.named_tensors() if not t.requires_grad]

    def freeze(self) -> None:
        for t in self.trainable_parameters():
            t.requires_grad = False

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.named_tensors()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        targets = dict(self.named_tensors())
        missing = sorted(set(targets) - set(state))
        if missing:
            raise ValueError(f"state is missing tensors: {missing[:5]}")
        for name, t in targets.items():
            if state[name].shape != t.shape:
                raise ValueError(f"{name}: expected shape {t.shape}, got {state[name].shape}")
            t.data[...] = state[name]

    # ── Forward ───────────────────────────────────────────────────────────────

    def encode(
        self,
        features: Tensor,
        train: bool = False,
        sparsify_rng: np.random.Generator | None = None,
        dropout_rng: np.random.Generator | None = None,
    ) -> Tensor:
        return self.encoder.encode_with_prompts(
            features,
            self.prompts,
            self.bank,
            self.sparsify,
            train=train,
            rng=sparsify_rng,
            component=self.cfg.wavelet.component,
            dropout=self.cfg.train.dropout,
            dropout_rng=dropout_rng,
        )

    def forward(
        self,
        features: Tensor,
        train: bool = False,
        sparsify_rng: np.random.Generator | None = None,
        dropout_rng: np.random.Generator | None = None,
    ) -> Tensor:
        """(bonafide, spoof) logits for T x d or batch x T x d features."""
        encoded = self.encode(features, train, sparsify_rng, dropout_rng)
        return self.classifier.classify(encoded, self.cfg.train.dropout, train, dropout_rng)

    __call__ = forward

    def embed(self, features: Tensor) -> Tensor:
        """Pooled penultimate representation in eval mode."""
        return self.classifier.embed(self.encode(features))

    def loss(self, logits: Tensor, labels: np.ndarray) -> Tensor:
        """Cross-entropy plus the weighted reconstruction penalty of the filter bank."""
        ce = ops.cross_entropy(logits, labels)
        lam = self.cfg.wavelet.lambda_pr
        if lam > 0 and filters_trainable(self.cfg):
            return ce + lam * pr_penalty(self.bank)
        return ce

    def scores(self, features: Tensor) -> np.ndarray:
        return scores(self.forward(features))


# ── Parameter accounting ──────────────────────────────────────────────────────


def closed_form_counts(cfg: ExperimentConfig) -> tuple[int, int, float]:
    """(trainable, total, percent) without building any weights.

    trainable = layers * p * d + 4 * filter_length (learnable wavelet banks) + classifier
    """
    enc = cfg.encoder
    taps = 0
    if uses_filter_bank(cfg):
        taps = 4 * FilterBank.from_family(cfg.wavelet.family, learnable=False).length
    trainable = enc.layers * cfg.prompt.p * enc.d + cfg.classifier.parameter_count(enc.d)
    frozen = enc.parameter_count() + enc.extractor_params
    if filters_trainable(cfg):
        trainable += taps
    else:
        frozen += taps
    total = trainable + frozen
    return trainable, total, 100.0 * trainable / total


def count_params(model: WaveSPNet) -> tuple[int, int, float]:
    """(trainable, total, percent) from the allocated tensors plus the nominal extractor."""
    trainable = sum(t.size for t in model.trainable_parameters())
    frozen = sum(t.size for t in model.frozen_parameters()) + model.cfg.encoder.extractor_params
    total = trainable + frozen
    return trainable, total, 100.0 * trainable / total if total else 0.0
