"""Training, evaluation, ablation sweeps and embedding export."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .autodiff import NumericalInstabilityError, Tensor, backward, no_grad, ops
from .checkpoint import Checkpoint, save_checkpoint
from .config import ExperimentConfig, save_config
from .dataset import FeatureBank, load_split
from .metrics import (
    EvalReport,
    ScoreSet,
    aggregate_chunks,
    eer,
    evaluate_scores,
    format_report,
    write_scores,
)
from .model import WaveSPNet, count_params
from .optim import Adam
from .rng import rng_stream
from .ssm_classifier import scores as logit_scores
from .wavelet_prompt import COMPONENTS, WAVELET_VARIANTS

logger = logging.getLogger("wavesp")

CHECKPOINT_NAME = "checkpoint.wsp"
AXES = ("component", "filters", "rho", "m")
EVAL_BATCH = 64


@dataclass
class EarlyStopping:
    """Counts consecutive epochs whose dev loss fails to improve by more than `min_delta`."""

    patience: int
    min_delta: float = 1e-6
    best: float = math.inf
    stale: int = 0

    def update(self, value: float) -> bool:
        """Record one epoch; True once `patience` non-improving epochs have accumulated."""
        if value < self.best - self.min_delta:
            self.best = value
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


@dataclass
class Banks:
    train: FeatureBank
    dev: FeatureBank
    eval: FeatureBank | None = None

    @classmethod
    def load(cls, cfg: ExperimentConfig, corpus: Path | None = None, with_eval: bool = False) -> "Banks":
        return cls(
            train=load_split(cfg, "train", corpus),
            dev=load_split(cfg, "dev", corpus),
            eval=load_split(cfg, "eval", corpus) if with_eval else None,
        )


def model_from_checkpoint(ckpt: Checkpoint) -> WaveSPNet:
    """Rebuild the model; the frozen encoder is regenerated from its seed."""
    model = WaveSPNet(ckpt.config)
    model.load_state_dict(ckpt.state)
    return model


# ── Steps ─────────────────────────────────────────────────────────────────────


def train_step(
    model: WaveSPNet,
    optimizer: Adam,
    features: np.ndarray,
    targets: np.ndarray,
    sparsify_rng: np.random.Generator,
    dropout_rng: np.random.Generator,
    step: int,
) -> float:
    optimizer.zero_grad()
    logits = model.forward(Tensor(features), train=True, sparsify_rng=sparsify_rng, dropout_rng=dropout_rng)
    loss = model.loss(logits, targets)
    value = loss.item()
    if not math.isfinite(value):
        logger.error(f"Non-finite training loss ({value}) at step {step}")
        raise NumericalInstabilityError(f"non-finite training loss at step {step}")
    backward(loss)
    optimizer.step()
    return value


def score_bank(model: WaveSPNet, bank: FeatureBank, batch: int = EVAL_BATCH) -> tuple[np.ndarray, float]:
    """Eval-mode chunk scores and mean cross-entropy over the bank, in stored order."""
    chunk_scores = np.empty(len(bank))
    targets = bank.targets
    total = 0.0
    with no_grad():
        for idx in bank.batches(batch):
            logits = model.forward(Tensor(bank.features[idx]))
            chunk_scores[idx] = logit_scores(logits)
            total += ops.cross_entropy(logits, targets[idx]).item() * idx.size
    return chunk_scores, total / len(bank)


def utterance_scores(bank: FeatureBank, chunk_scores: np.ndarray) -> ScoreSet:
    return aggregate_chunks(zip(bank.utt_ids, chunk_scores, bank.labels))


# ── Train / evaluate ──────────────────────────────────────────────────────────


def train(
    cfg: ExperimentConfig,
    banks: Banks | None = None,
    out_dir: Path | None = None,
    model: WaveSPNet | None = None,
) -> Checkpoint:
    """Adam over the trainable set with early stopping on dev loss.

    The returned checkpoint holds the parameters of the epoch with the lowest
    dev EER and the optimizer moments after the final epoch.
    """
    cfg.validate()
    banks = banks or Banks.load(cfg)
    model = model or WaveSPNet(cfg)
    optimizer = Adam(model.trainable_parameters(), lr=cfg.train.lr)
    batch_rng = rng_stream(cfg.seed, "batches")
    dropout_rng = rng_stream(cfg.seed, "dropout")
    sparsify_rng = rng_stream(cfg.seed, "sparsify")
    trainable, total, percent = count_params(model)
    logger.info(
        f"Training {cfg.prompt.variant}: {trainable} trainable of {total} ({percent:.3f}%), "
        f"{len(banks.train)} train chunks"
    )

    stopper = EarlyStopping(cfg.train.patience)
    targets = banks.train.targets
    history = []
    best_eer, best_epoch, best_state = math.inf, 0, model.state_dict()
    step = 0
    for epoch in range(1, cfg.train.max_epochs + 1):
        losses = []
        for idx in banks.train.batches(cfg.train.batch, batch_rng):
            step += 1
            losses.append(
                train_step(
                    model, optimizer, banks.train.features[idx], targets[idx], sparsify_rng, dropout_rng, step
                )
            )
        train_loss = math.fsum(losses) / len(losses)
        chunk_scores, dev_loss = score_bank(model, banks.dev)
        dev_eer, _ = eer(utterance_scores(banks.dev, chunk_scores))
        history.append({"epoch": epoch, "train_loss": train_loss, "dev_loss": dev_loss, "dev_eer": dev_eer})

        if dev_eer < best_eer:
            best_eer, best_epoch, best_state = dev_eer, epoch, model.state_dict()
        stop = stopper.update(dev_loss)
        logger.info(
            f"Epoch {epoch:3d}: train loss {train_loss:.4f}, dev loss {dev_loss:.4f}, "
            f"dev EER {100 * dev_eer:.2f}%, patience {stopper.stale}/{stopper.patience}"
        )
        if stop:
            logger.info(f"Early stop at epoch {epoch}: dev loss flat for {stopper.patience} epochs")
            break

    logger.info(f"Best dev EER {100 * best_eer:.2f}% at epoch {best_epoch}")
    ckpt = Checkpoint(
        config=cfg,
        state=best_state,
        optimizer=optimizer.state_dict(),
        best_dev_eer=best_eer,
        best_epoch=best_epoch,
        history=history,
    )
    if out_dir is not None:
        out_dir = Path(out_dir)
        save_checkpoint(ckpt, out_dir / CHECKPOINT_NAME)
        save_config(cfg, out_dir / "config.ini")
        ckpt.history_frame().to_csv(out_dir / "history.tsv", sep="\t", index=False)
    return ckpt


def evaluate(
    ckpt: Checkpoint,
    split: str = "eval",
    bank: FeatureBank | None = None,
    out_dir: Path | None = None,
    corpus: Path | None = None,
) -> tuple[EvalReport, ScoreSet]:
    """Eval-mode scoring of one split; writes scores_<split>.txt and report_<split>.txt into `out_dir`."""
    if split not in ("dev", "eval"):
        raise ValueError(f"Unknown evaluation split: {split}. Must be one of ('dev', 'eval')")
    model = model_from_checkpoint(ckpt)
    if bank is None:
        bank = load_split(ckpt.config, split, corpus)
    chunk_scores, _ = score_bank(model, bank)
    utt = utterance_scores(bank, chunk_scores)
    report = evaluate_scores(utt)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_scores(out_dir / f"scores_{split}.txt", utt)
        (out_dir / f"report_{split}.txt").write_text(format_report(report, split), encoding="utf-8", newline="\n")
    logger.info(f"{split}: EER {100 * report.eer:.2f}% ± {100 * report.eer_ci_halfwidth:.2f}")
    return report, utt


# ── Ablation ──────────────────────────────────────────────────────────────────


def ablation_configs(cfg: ExperimentConfig, axis: str, values: Sequence) -> list[tuple[str, ExperimentConfig]]:
    """One validated config per value of `axis`."""
    if axis not in AXES:
        raise ValueError(f"Unknown ablation axis: {axis}. Must be one of {AXES}")
    if not values:
        raise ValueError(f"no values given for axis {axis}")
    if axis in ("component", "filters", "rho") and cfg.prompt.variant not in WAVELET_VARIANTS:
        raise ValueError(f"axis {axis} needs a wavelet prompt variant, got {cfg.prompt.variant}")
    runs = []
    for value in values:
        if axis == "component":
            if value not in COMPONENTS:
                raise ValueError(f"Unknown component: {value}. Must be one of {COMPONENTS}")
            run = cfg.with_values("wavelet", component=value)
        elif axis == "filters":
            if value not in ("fixed", "learnable"):
                raise ValueError(f"Unknown filter mode: {value}. Must be one of ('fixed', 'learnable')")
            run = cfg.with_values("wavelet", filters=value)
        elif axis == "rho":
            rho = float(value)
            if not 0.0 < rho <= 1.0:
                raise ValueError(f"sparsity ratio must lie in (0, 1], got {value}")
            run = cfg.with_values("wavelet", rho=rho)
        else:
            m, p = int(value), cfg.prompt.p
            if not 2 <= m <= p:
                raise ValueError(f"enhanced token count must lie in [2, {p}], got {value}")
            variant = "WSPT" if m == p else "PartialWSPT"
            run = cfg.with_values("prompt", m=m, variant=variant)
        runs.append((str(value), run.validate()))
    return runs


def ablate(
    cfg: ExperimentConfig,
    axis: str,
    values: Sequence,
    out_dir: Path | None = None,
    banks: Banks | None = None,
) -> list[tuple[str, EvalReport]]:
    """Train and evaluate once per value with a shared seed and corpus."""
    runs = ablation_configs(cfg, axis, values)
    banks = banks or Banks.load(cfg, with_eval=True)
    results = []
    rows = []
    for value, run in runs:
        logger.info(f"Ablation {axis}={value}")
        run_dir = Path(out_dir) / f"{axis}={value}" if out_dir is not None else None
        ckpt = train(run, banks, run_dir)
        report, _ = evaluate(ckpt, "eval", banks.eval, run_dir)
        trainable, _, percent = count_params(model_from_checkpoint(ckpt))
        results.append((value, report))
        rows.append({axis: value, **report.as_dict(), "trainable": trainable, "percent": percent})
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows).to_csv(Path(out_dir) / f"ablation_{axis}.tsv", sep="\t", index=False)
    return results


# ── Embeddings ────────────────────────────────────────────────────────────────


def utterance_embeddings(ckpt: Checkpoint, bank: FeatureBank) -> tuple[list[str], list[str], np.ndarray]:
    """Pooled penultimate vectors averaged over each utterance's chunks, ordered by utt_id."""
    model = model_from_checkpoint(ckpt)
    chunk_vecs = np.empty((len(bank), ckpt.config.classifier.d_model))
    with no_grad():
        for idx in bank.batches(EVAL_BATCH):
            chunk_vecs[idx] = model.embed(Tensor(bank.features[idx])).data
    frame = pd.DataFrame(chunk_vecs)
    frame["utt_id"] = bank.utt_ids
    means = frame.groupby("utt_id", sort=True).mean()
    vectors = means.to_numpy()
    utt_ids = list(means.index)
    label_of = dict(zip(bank.utt_ids, bank.labels))
    return utt_ids, [label_of[u] for u in utt_ids], vectors


def export_embeddings(
    ckpt: Checkpoint,
    split: str,
    path: Path,
    bank: FeatureBank | None = None,
    corpus: Path | None = None,
) -> tuple[list[str], list[str], np.ndarray]:
    """Write `utt_id label v_1 ... v_d` lines, one per utterance."""
    if bank is None:
        bank = load_split(ckpt.config, split, corpus)
    utt_ids, labels, vectors = utterance_embeddings(ckpt, bank)
    lines = [
        f"{u} {label} " + " ".join(f"{v:.8f}" for v in vec) + "\n"
        for u, label, vec in zip(utt_ids, labels, vectors)
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(lines), encoding="ascii", newline="\n")
    logger.info(f"Exported {len(lines)} embeddings of width {vectors.shape[1]} to {path}")
    return utt_ids, labels, vectors
