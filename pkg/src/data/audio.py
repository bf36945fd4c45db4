"""Waveform type and WAV input/output."""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

SAMPLE_RATE = 16000
PCM_SCALE = 32767.0


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"waveform must be mono 1-D samples, got shape {samples.shape}")
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483648.0
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    return data.astype(np.float64)


def read_wav(path: Path) -> tuple[np.ndarray, int]:
    rate, data = wavfile.read(path)
    samples = _to_float(data)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return samples, int(rate)


LOADERS = {
    ".wav": read_wav,
}


def load_waveform(path: Path, target_rate: int = SAMPLE_RATE) -> Waveform:
    """Read an audio file, mix to mono, convert to [-1, 1] floats and resample."""
    path = Path(path)
    loader = LOADERS.get(path.suffix.lower())
    if loader is None:
        raise ValueError(f"Unsupported file type: {path.suffix}")
    if not path.exists():
        raise FileNotFoundError(f"audio file not found: {path}")
    samples, rate = loader(path)
    if rate != target_rate:
        g = gcd(rate, target_rate)
        samples = resample_poly(samples, target_rate // g, rate // g)
    return Waveform(np.clip(samples, -1.0, 1.0), target_rate)


def save_waveform(path: Path, w: Waveform) -> None:
    """Write 16-bit PCM mono."""
    pcm = np.round(np.clip(w.samples, -1.0, 1.0) * PCM_SCALE).astype(np.int16)
    wavfile.write(path, w.sample_rate, pcm)
