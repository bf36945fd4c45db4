import numpy as np
import pytest

from src.backbone import EncoderConfig
from src.config import DataConfig, ExperimentConfig, PromptConfig, TrainConfig
from src.data import CorpusSpec, synth_corpus, write_corpus
from src.ssm_classifier import ClassifierConfig


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_cfg(tmp_path) -> ExperimentConfig:
    """A configuration small enough for per-test training runs."""
    return ExperimentConfig(
        seed=7,
        out=str(tmp_path / "run"),
        prompt=PromptConfig(variant="PartialWSPT", p=4, m=2),
        encoder=EncoderConfig(layers=2, d=16, heads=2, ff=32, seed=11),
        classifier=ClassifierConfig(blocks=1, d_state=4, d_model=16),
        train=TrainConfig(lr=5e-3, batch=4, dropout=0.1, max_epochs=2, patience=7),
        data=DataConfig(frame_pool=8, n_train=4, n_dev=3, n_eval=3, min_dur=1.0, max_dur=5.0),
    ).validate()


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Written corpus: 4/3/3 utterances per class, 1-5 s each."""
    out = tmp_path_factory.mktemp("corpus")
    spec = CorpusSpec(n_train=4, n_dev=3, n_eval=3, seed=7, min_dur=1.0, max_dur=5.0)
    write_corpus(synth_corpus(spec), out)
    return out


@pytest.fixture
def corpus_cfg(tiny_cfg, tiny_corpus) -> ExperimentConfig:
    return tiny_cfg.with_values("data", corpus=str(tiny_corpus))
