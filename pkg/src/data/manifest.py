"""Corpus manifest: one line per utterance, `utt_id wav_path label split`."""

from __future__ import annotations

import logging
from pathlib import Path

import pandas as pd

from .audio import save_waveform
from .synth import LABELS, SPLITS, Utterance

logger = logging.getLogger("wavesp")

MANIFEST_NAME = "manifest.txt"
COLUMNS = ["utt_id", "wav_path", "label", "split"]


def write_corpus(corpus: dict[str, list[Utterance]], out_dir: Path) -> Path:
    """Write every utterance as 16-bit PCM WAV and the manifest next to them."""
    out_dir = Path(out_dir)
    lines = []
    for split, utterances in corpus.items():
        wav_dir = out_dir / "wav" / split
        wav_dir.mkdir(parents=True, exist_ok=True)
        for utt in utterances:
            rel = Path("wav") / split / f"{utt.utt_id}.wav"
            save_waveform(out_dir / rel, utt.waveform)
            lines.append(f"{utt.utt_id} {rel.as_posix()} {utt.label} {split}\n")
    manifest = out_dir / MANIFEST_NAME
    manifest.write_text("".join(lines), encoding="utf-8", newline="\n")
    logger.info(f"Wrote {len(lines)} utterances to {out_dir}")
    return manifest


def read_manifest(path: Path) -> pd.DataFrame:
    """Load the manifest; `wav_path` is resolved against the manifest directory."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"corpus manifest not found: {path}")
    df = pd.read_csv(path, sep=" ", header=None, names=COLUMNS, dtype=str)
    bad = set(df["label"]) - set(LABELS)
    if bad:
        raise ValueError(f"Unknown label(s) in {path}: {sorted(bad)}. Must be one of {LABELS}")
    df["wav_path"] = [str(path.parent / p) for p in df["wav_path"]]
    return df


def split_rows(df: pd.DataFrame, split: str) -> pd.DataFrame:
    """Rows of one split, ordered by utt_id."""
    if split not in SPLITS:
        raise ValueError(f"Unknown split: {split}. Must be one of {SPLITS}")
    rows = df[df["split"] == split]
    if rows.empty:
        raise FileNotFoundError(f"split {split!r} is absent from the manifest")
    return rows.sort_values("utt_id").reset_index(drop=True)
