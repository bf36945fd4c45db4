"""Fixed-length chunking of utterances for the 4-second protocol."""

import hashlib
import math

import numpy as np

from .data.audio import Waveform

CHUNK_SECONDS = 4.0


def chunk_audio(w: Waveform, len_s: float = CHUNK_SECONDS) -> list[Waveform]:
    """Split into consecutive non-overlapping windows of `len_s` seconds.

    The last window is zero-padded at the tail; a clip shorter than one window
    gives a single padded chunk.
    """
    if len_s <= 0:
        raise ValueError(f"chunk length must be positive, got {len_s}")
    if w.samples.size == 0:
        raise ValueError("cannot chunk an empty waveform")
    size = int(round(len_s * w.sample_rate))
    count = math.ceil(w.samples.size / size)
    padded = np.zeros(count * size, dtype=np.float64)
    padded[: w.samples.size] = w.samples
    return [Waveform(padded[i * size : (i + 1) * size], w.sample_rate) for i in range(count)]


def chunk_id(utt_id: str, index: int) -> str:
    # Deterministic ID from utterance + index
    return hashlib.md5(f"{utt_id}:{index}".encode()).hexdigest()


def chunk_utterance(w: Waveform, metadata: dict, len_s: float = CHUNK_SECONDS) -> list[tuple[str, Waveform, dict]]:
    """Chunk one utterance into (chunk_id, chunk, chunk_metadata) tuples."""
    utt_id = metadata.get("utt_id", "unknown")
    return [
        (chunk_id(utt_id, i), chunk, {**metadata, "chunk_index": i})
        for i, chunk in enumerate(chunk_audio(w, len_s))
    ]
