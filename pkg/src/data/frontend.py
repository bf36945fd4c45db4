"""Frozen feature extractor: framed log-magnitude spectra under a fixed random projection."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from ..autodiff import Tensor
from ..rng import rng_stream
from .audio import SAMPLE_RATE, Waveform

WIN_LENGTH = 400  # 25 ms
HOP_LENGTH = 320  # 20 ms
N_FFT = 512
N_BINS = N_FFT // 2 + 1
LOG_FLOOR = 1e-6


@lru_cache(maxsize=8)
def projection(d: int, seed: int) -> np.ndarray:
    """Seed-derived Gaussian (bins x d) projection, scaled by 1/sqrt(bins)."""
    proj = rng_stream(seed, "frontend").standard_normal((N_BINS, d)) / np.sqrt(N_BINS)
    proj.flags.writeable = False
    return proj


def log_spectrogram(samples: np.ndarray) -> np.ndarray:
    """(T, bins) log-magnitude frames; the signal is centred by half a window each side."""
    padded = np.pad(samples, WIN_LENGTH // 2)
    frames = sliding_window_view(padded, WIN_LENGTH)[::HOP_LENGTH]
    spectrum = np.fft.rfft(frames * get_window("hann", WIN_LENGTH), n=N_FFT, axis=-1)
    return np.log(np.abs(spectrum) + LOG_FLOOR)


def pool_frames(features: np.ndarray, factor: int) -> np.ndarray:
    """Average non-overlapping groups of `factor` frames; a partial tail group is dropped."""
    if factor < 1:
        raise ValueError(f"frame pooling factor must be >= 1, got {factor}")
    if factor == 1:
        return features
    steps = features.shape[0] // factor
    if steps < 1:
        raise ValueError(f"pooling factor {factor} exceeds the {features.shape[0]} available frames")
    return features[: steps * factor].reshape(steps, factor, -1).mean(axis=1)


def frame_count(chunk_s: float = 4.0, frame_pool: int = 1) -> int:
    n = int(round(chunk_s * SAMPLE_RATE))
    return (1 + n // HOP_LENGTH) // frame_pool


def frontend_features(
    w: Waveform, d: int, seed: int, chunk_s: float = 4.0, frame_pool: int = 1
) -> Tensor:
    """T x d features of one chunk; T = 201 for a 4 s chunk without pooling."""
    if w.sample_rate != SAMPLE_RATE:
        raise ValueError(f"frontend expects {SAMPLE_RATE} Hz audio, got {w.sample_rate} Hz")
    expected = int(round(chunk_s * SAMPLE_RATE))
    if w.samples.size != expected:
        raise ValueError(f"frontend expects a {chunk_s} s chunk ({expected} samples), got {w.samples.size}")
    if d < 1:
        raise ValueError(f"feature width must be positive, got {d}")
    features = log_spectrogram(w.samples) @ projection(d, seed)
    return Tensor(pool_frames(features, frame_pool))
