import numpy as np
import pytest
from scipy.io import wavfile
from scipy.signal import welch

from src.chunker import chunk_audio, chunk_id, chunk_utterance
from src.data import (
    SAMPLE_RATE,
    CorpusSpec,
    Waveform,
    frame_count,
    frontend_features,
    load_waveform,
    log_spectrogram,
    read_manifest,
    save_waveform,
    split_rows,
    synth_corpus,
)
from src.data.frontend import HOP_LENGTH, N_BINS, WIN_LENGTH, pool_frames
from src.data.synth import synth_split
from src.metrics import ScoreSet, auc_f1_acc


def _wave(seconds: float, seed: int = 0) -> Waveform:
    n = int(round(seconds * SAMPLE_RATE))
    return Waveform(np.random.default_rng(seed).uniform(-0.5, 0.5, n))


# ── Chunking ──────────────────────────────────────────────────────────────────


@pytest.mark.parametrize(("seconds", "count"), [(4.0, 1), (10.0, 3), (1.0, 1), (8.001, 3)])
def test_chunk_counts(seconds, count):
    chunks = chunk_audio(_wave(seconds))
    assert len(chunks) == count
    assert all(c.samples.size == 4 * SAMPLE_RATE for c in chunks)


def test_chunks_rebuild_the_waveform_with_zero_tail():
    w = _wave(10.0)
    joined = np.concatenate([c.samples for c in chunk_audio(w)])
    np.testing.assert_array_equal(joined[: w.samples.size], w.samples)
    np.testing.assert_array_equal(joined[w.samples.size :], 0.0)


def test_chunking_rejects_bad_input():
    with pytest.raises(ValueError, match="positive"):
        chunk_audio(_wave(1.0), len_s=0)
    with pytest.raises(ValueError, match="empty"):
        chunk_audio(Waveform(np.zeros(0)))


def test_chunk_ids_are_stable_and_distinct():
    assert chunk_id("eval-spoof-0001", 0) == chunk_id("eval-spoof-0001", 0)
    assert chunk_id("eval-spoof-0001", 0) != chunk_id("eval-spoof-0001", 1)
    items = chunk_utterance(_wave(9.0), {"utt_id": "u1", "label": "spoof"})
    assert [meta["chunk_index"] for _, _, meta in items] == [0, 1, 2]
    assert all(meta["label"] == "spoof" for _, _, meta in items)


# ── Corpus ────────────────────────────────────────────────────────────────────


def test_corpus_is_balanced_and_deterministic():
    spec = CorpusSpec(n_train=3, n_dev=1, n_eval=2, seed=3, min_dur=1.0, max_dur=2.0)
    a, b = synth_corpus(spec), synth_corpus(spec)
    assert {split: len(utts) for split, utts in a.items()} == {"train": 6, "dev": 2, "eval": 4}
    for split in a:
        for x, y in zip(a[split], b[split]):
            assert x.utt_id == y.utt_id and x.label == y.label
            np.testing.assert_array_equal(x.waveform.samples, y.waveform.samples)
    labels = [u.label for u in a["train"]]
    assert labels.count("bonafide") == labels.count("spoof") == 3


def test_corpus_waveforms_within_range():
    spec = CorpusSpec(n_train=2, n_dev=0, n_eval=0, seed=1, min_dur=1.0, max_dur=3.0)
    for utt in synth_split(spec, "train"):
        assert 1.0 <= utt.waveform.duration <= 3.0
        assert np.max(np.abs(utt.waveform.samples)) == pytest.approx(0.9)
        assert (utt.artifact != "") == (utt.label == "spoof")


def test_corpus_without_artifacts():
    spec = CorpusSpec(n_train=2, n_dev=0, n_eval=0, seed=1, artifact_kinds=(), min_dur=1.0, max_dur=1.5)
    assert all(u.artifact == "" for u in synth_split(spec, "train"))


@pytest.mark.parametrize(
    ("kwargs", "match"),
    [({"artifact_kinds": ("vocoder",)}, "Unknown artifact"), ({"min_dur": 5.0, "max_dur": 2.0}, "min_dur")],
)
def test_invalid_corpus_spec(kwargs, match):
    with pytest.raises(ValueError, match=match):
        CorpusSpec(**kwargs)


def _band_features(utterances, bands: int = 16):
    """Log energy and mean log power of equal-width bands of the averaged spectrum."""
    rows = []
    for utt in utterances:
        _, power = welch(utt.waveform.samples, fs=SAMPLE_RATE, nperseg=512)
        grouped = power[: bands * (power.size // bands)].reshape(bands, -1) + 1e-12
        rows.append(np.concatenate([np.log(grouped.sum(axis=1)), np.log(grouped).mean(axis=1)]))
    return np.array(rows)


@pytest.mark.slow
def test_default_corpus_is_linearly_separable_on_band_energies():
    spec = CorpusSpec()
    train, test = synth_split(spec, "train"), synth_split(spec, "eval")
    x_train, x_test = _band_features(train), _band_features(test)
    mu, sd = x_train.mean(axis=0), x_train.std(axis=0) + 1e-12
    a = np.hstack([(x_train - mu) / sd, np.ones((len(train), 1))])
    y = np.array([1.0 if u.label == "bonafide" else -1.0 for u in train])
    w = np.linalg.solve(a.T @ a + np.eye(a.shape[1]), a.T @ y)
    scores = np.hstack([(x_test - mu) / sd, np.ones((len(test), 1))]) @ w
    score_set = ScoreSet([(u.utt_id, float(s), u.label) for u, s in zip(test, scores)])
    auc, _, _ = auc_f1_acc(score_set, 0.0)
    assert auc > 0.8


def test_manifest_round_trip(tiny_corpus):
    df = read_manifest(tiny_corpus)
    assert len(df) == 20
    dev = split_rows(df, "dev")
    assert list(dev["utt_id"]) == sorted(dev["utt_id"])
    assert set(dev["label"]) == {"bonafide", "spoof"}
    w = load_waveform(dev["wav_path"][0])
    assert w.sample_rate == SAMPLE_RATE and 1.0 <= w.duration <= 5.0


def test_manifest_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_manifest(tmp_path)
    (tmp_path / "manifest.txt").write_text("u1 wav/u1.wav fake train\n")
    with pytest.raises(ValueError, match="Unknown label"):
        read_manifest(tmp_path)


def test_absent_split_reported(tmp_path):
    (tmp_path / "manifest.txt").write_text("u1 wav/u1.wav bonafide train\n")
    with pytest.raises(FileNotFoundError, match="eval"):
        split_rows(read_manifest(tmp_path), "eval")


# ── Audio ─────────────────────────────────────────────────────────────────────


def test_pcm_round_trip(tmp_path):
    w = _wave(0.5)
    save_waveform(tmp_path / "a.wav", w)
    back = load_waveform(tmp_path / "a.wav")
    assert np.max(np.abs(back.samples - w.samples)) < 1e-4


def test_load_resamples_to_16k(tmp_path):
    t = np.arange(8000) / 8000
    wavfile.write(tmp_path / "low.wav", 8000, (0.3 * np.sin(2 * np.pi * 440 * t) * 32767).astype(np.int16))
    w = load_waveform(tmp_path / "low.wav")
    assert w.sample_rate == SAMPLE_RATE
    assert w.samples.size == 16000


def test_load_errors(tmp_path):
    with pytest.raises(ValueError, match="Unsupported file type"):
        load_waveform(tmp_path / "clip.mp3")
    with pytest.raises(FileNotFoundError):
        load_waveform(tmp_path / "missing.wav")


def test_waveform_must_be_mono():
    with pytest.raises(ValueError, match="mono"):
        Waveform(np.zeros((2, 10)))


# ── Frontend ──────────────────────────────────────────────────────────────────


def test_frontend_shape_for_four_seconds():
    features = frontend_features(_wave(4.0), d=32, seed=1)
    assert features.shape == (201, 32) == (frame_count(4.0), 32)
    assert not features.requires_grad


def test_frontend_pooling_shape():
    assert frontend_features(_wave(4.0), d=8, seed=1, frame_pool=4).shape == (50, 8)
    assert frame_count(4.0, 4) == 50


def test_silent_chunk_gives_identical_frames():
    features = frontend_features(Waveform(np.zeros(4 * SAMPLE_RATE)), d=16, seed=2).data
    np.testing.assert_allclose(features, np.broadcast_to(features[0], features.shape))


def test_log_spectrogram_matches_direct_dft():
    x = np.random.default_rng(5).standard_normal(SAMPLE_RATE // 2)
    spec = log_spectrogram(x)
    padded = np.pad(x, WIN_LENGTH // 2)
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(WIN_LENGTH) / WIN_LENGTH)
    for k in (0, 7, spec.shape[0] - 1):
        frame = padded[k * HOP_LENGTH : k * HOP_LENGTH + WIN_LENGTH] * window
        expected = np.log(np.abs(np.fft.rfft(frame, n=512)) + 1e-6)
        np.testing.assert_allclose(spec[k], expected, atol=1e-10)
    assert spec.shape[1] == N_BINS


def test_projection_depends_on_seed():
    a = frontend_features(_wave(4.0), d=8, seed=1).data
    b = frontend_features(_wave(4.0), d=8, seed=2).data
    assert not np.allclose(a, b)


def test_frontend_rejects_wrong_length_or_rate():
    with pytest.raises(ValueError, match="4.0 s chunk"):
        frontend_features(_wave(3.0), d=8, seed=1)
    with pytest.raises(ValueError, match="16000 Hz"):
        frontend_features(Waveform(np.zeros(32000), 8000), d=8, seed=1)


def test_pool_frames_drops_partial_tail():
    x = np.arange(10.0).reshape(5, 2)
    np.testing.assert_array_equal(pool_frames(x, 2), [[1.0, 2.0], [5.0, 6.0]])
