from .audio import LOADERS, SAMPLE_RATE, Waveform, load_waveform, save_waveform
from .frontend import frame_count, frontend_features, log_spectrogram, projection
from .manifest import MANIFEST_NAME, read_manifest, split_rows, write_corpus
from .synth import ARTIFACT_KINDS, LABELS, SPLITS, CorpusSpec, Utterance, synth_corpus

__all__ = [
    "ARTIFACT_KINDS",
    "LABELS",
    "LOADERS",
    "MANIFEST_NAME",
    "SAMPLE_RATE",
    "SPLITS",
    "CorpusSpec",
    "Utterance",
    "Waveform",
    "frame_count",
    "frontend_features",
    "load_waveform",
    "log_spectrogram",
    "projection",
    "read_manifest",
    "save_waveform",
    "split_rows",
    "synth_corpus",
    "write_corpus",
]
