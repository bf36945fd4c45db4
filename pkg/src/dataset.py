"""Chunk-level feature sets built from the corpus manifest."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from . import chunker
from .config import ExperimentConfig
from .data import frontend_features, load_waveform, read_manifest, split_rows
from .model import CLASS_INDEX

logger = logging.getLogger("wavesp")


@dataclass
class FeatureBank:
    """Features of every chunk of one split, ordered by (utt_id, chunk index)."""

    split: str
    features: np.ndarray  # (chunks, T, d)
    chunk_ids: list[str]
    utt_ids: list[str]
    labels: list[str]

    def __len__(self) -> int:
        return len(self.chunk_ids)

    @property
    def targets(self) -> np.ndarray:
        return np.array([CLASS_INDEX[label] for label in self.labels], dtype=np.int64)

    @property
    def n_utterances(self) -> int:
        return len(set(self.utt_ids))

    def batches(self, size: int, rng: np.random.Generator | None = None) -> Iterator[np.ndarray]:
        """Index batches; shuffled when an RNG is given, in stored order otherwise."""
        order = rng.permutation(len(self)) if rng is not None else np.arange(len(self))
        for start in range(0, len(order), size):
            yield order[start : start + size]


def _utterance_features(row, cfg: ExperimentConfig) -> list[tuple[str, np.ndarray, str, str]]:
    w = load_waveform(Path(row.wav_path))
    out = []
    for cid, chunk, _ in chunker.chunk_utterance(w, {"utt_id": row.utt_id}, cfg.data.chunk_s):
        feats = frontend_features(chunk, cfg.encoder.d, cfg.seed, cfg.data.chunk_s, cfg.data.frame_pool)
        out.append((cid, feats.data, row.utt_id, row.label))
    return out


def load_split(cfg: ExperimentConfig, split: str, corpus: Path | None = None) -> FeatureBank:
    """Read, chunk and featurise one split of the corpus named by `cfg.data.corpus`."""
    rows = split_rows(read_manifest(Path(corpus or cfg.data.corpus)), split)
    items = list(rows.itertuples(index=False))
    if cfg.train.workers > 0:
        with ThreadPoolExecutor(max_workers=cfg.train.workers) as pool:
            per_utt = list(pool.map(lambda r: _utterance_features(r, cfg), items))
    else:
        per_utt = [_utterance_features(r, cfg) for r in items]
    chunks = [c for group in per_utt for c in group]
    logger.info(f"Loaded {split}: {len(items)} utterances, {len(chunks)} chunks")
    return FeatureBank(
        split=split,
        features=np.stack([c[1] for c in chunks]),
        chunk_ids=[c[0] for c in chunks],
        utt_ids=[c[2] for c in chunks],
        labels=[c[3] for c in chunks],
    )
