"""Synthetic bonafide/spoof corpus.

Bonafide utterances are voiced harmonic tones with formant-like band emphasis,
a syllabic envelope and additive noise. Spoof utterances come from the same
generator with one synthesis artifact applied to the clean signal before the
noise is added.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import filtfilt, iirnotch, istft, stft

from ..rng import rng_stream
from .audio import SAMPLE_RATE, Waveform

logger = logging.getLogger("wavesp")

ARTIFACT_KINDS = ("spectral_notch", "aliasing_fold", "phase_jitter", "am_buzz")
SPLITS = ("train", "dev", "eval")
LABELS = ("bonafide", "spoof")
PEAK = 0.9


@dataclass(frozen=True)
class CorpusSpec:
    n_train: int = 200
    n_dev: int = 50
    n_eval: int = 200
    seed: int = 1234
    artifact_kinds: tuple[str, ...] = ARTIFACT_KINDS
    min_dur: float = 3.0
    max_dur: float = 7.0
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        object.__setattr__(self, "artifact_kinds", tuple(self.artifact_kinds))
        for kind in self.artifact_kinds:
            if kind not in ARTIFACT_KINDS:
                raise ValueError(f"Unknown artifact kind: {kind}. Must be one of {ARTIFACT_KINDS}")
        if min(self.n_train, self.n_dev, self.n_eval) < 0:
            raise ValueError("utterance counts must be non-negative")
        if not 0 < self.min_dur <= self.max_dur:
            raise ValueError(f"need 0 < min_dur <= max_dur, got {self.min_dur}, {self.max_dur}")

    def count(self, split: str) -> int:
        if split not in SPLITS:
            raise ValueError(f"Unknown split: {split}. Must be one of {SPLITS}")
        return {"train": self.n_train, "dev": self.n_dev, "eval": self.n_eval}[split]


@dataclass(frozen=True)
class Utterance:
    utt_id: str
    waveform: Waveform
    label: str
    split: str
    artifact: str = ""
    meta: dict = field(default_factory=dict, compare=False)


# ── Generator ─────────────────────────────────────────────────────────────────


def voiced_tone(rng: np.random.Generator, n: int, rate: int) -> np.ndarray:
    """Harmonic source with slow pitch drift, formant weighting and a syllabic envelope."""
    t = np.arange(n) / rate
    f0 = rng.uniform(80.0, 300.0)
    drift = 1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0 * drift) / rate
    formants = np.array([rng.uniform(300, 900), rng.uniform(900, 2500), rng.uniform(2500, 3500)])
    widths = np.array([80.0, 120.0, 160.0])

    signal = np.zeros(n)
    for k in range(1, int(min(4000.0, rate / 2 - 1) // f0) + 1):
        freq = k * f0
        emphasis = np.exp(-0.5 * ((freq - formants) / widths) ** 2).sum()
        signal += (1.0 / k + emphasis) * np.sin(k * phase + rng.uniform(0, 2 * np.pi))

    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * rng.uniform(3.0, 6.0) * t + rng.uniform(0, 2 * np.pi)) ** 2
    return signal * envelope


def add_noise(rng: np.random.Generator, x: np.ndarray, snr_db: float) -> np.ndarray:
    power = np.mean(x**2)
    noise = rng.standard_normal(x.size) * np.sqrt(power / 10 ** (snr_db / 10))
    return x + noise


def spectral_notch(rng: np.random.Generator, x: np.ndarray, rate: int) -> np.ndarray:
    """Wide zero-phase band stop; the stop band is centre / Q wide."""
    b, a = iirnotch(rng.uniform(800.0, 3200.0), rng.uniform(0.7, 1.5), fs=rate)
    return filtfilt(b, a, x)


def aliasing_fold(rng: np.random.Generator, x: np.ndarray, rate: int) -> np.ndarray:
    """Decimate without an anti-alias filter, then upsample linearly."""
    q = int(rng.integers(3, 5))
    coarse = x[::q]
    return np.interp(np.arange(x.size), np.arange(coarse.size) * q, coarse)


def phase_jitter(rng: np.random.Generator, x: np.ndarray, rate: int) -> np.ndarray:
    _, _, spec = stft(x, fs=rate, nperseg=512)
    # Frame magnitudes survive; phases end up close to uniform.
    sigma = rng.uniform(2.0, 3.0)
    spec = spec * np.exp(1j * sigma * rng.standard_normal(spec.shape))
    _, y = istft(spec, fs=rate, nperseg=512)
    out = np.zeros(x.size)
    out[: min(x.size, y.size)] = y[: x.size]
    return out


def am_buzz(rng: np.random.Generator, x: np.ndarray, rate: int) -> np.ndarray:
    t = np.arange(x.size) / rate
    return x * (1.0 + rng.uniform(0.7, 1.0) * np.sin(2 * np.pi * rng.uniform(50.0, 120.0) * t))


ARTIFACTS = {
    "spectral_notch": spectral_notch,
    "aliasing_fold": aliasing_fold,
    "phase_jitter": phase_jitter,
    "am_buzz": am_buzz,
}


def synth_utterance(
    rng: np.random.Generator, spec: CorpusSpec, label: str, artifact_kinds: tuple[str, ...]
) -> tuple[Waveform, str, dict]:
    """One utterance; draws happen in a fixed order so a stream is reproducible."""
    rate = spec.sample_rate
    n = int(round(rng.uniform(spec.min_dur, spec.max_dur) * rate))
    clean = voiced_tone(rng, n, rate)
    snr_db = rng.uniform(10.0, 30.0)
    artifact = ""
    if label == "spoof" and artifact_kinds:
        artifact = artifact_kinds[int(rng.integers(len(artifact_kinds)))]
        clean = ARTIFACTS[artifact](rng, clean, rate)
    noisy = add_noise(rng, clean, snr_db)
    noisy = PEAK * noisy / max(np.max(np.abs(noisy)), 1e-12)
    return Waveform(noisy, rate), artifact, {"snr_db": snr_db}


def synth_split(spec: CorpusSpec, split: str) -> list[Utterance]:
    rng = rng_stream(spec.seed, f"corpus/{split}")
    utterances = []
    for i in range(spec.count(split)):
        for label in LABELS:
            w, artifact, meta = synth_utterance(rng, spec, label, spec.artifact_kinds)
            utt_id = f"{split}-{label}-{i:04d}"
            utterances.append(Utterance(utt_id, w, label, split, artifact, meta))
    return utterances


def synth_corpus(spec: CorpusSpec) -> dict[str, list[Utterance]]:
    """Labelled utterances per split, balanced per class, deterministic given the spec."""
    corpus = {split: synth_split(spec, split) for split in SPLITS}
    logger.info(
        f"Synthesised corpus: "
        + ", ".join(f"{split}={len(utts)}" for split, utts in corpus.items())
        + f" (artifacts: {', '.join(spec.artifact_kinds) or 'none'})"
    )
    return corpus
