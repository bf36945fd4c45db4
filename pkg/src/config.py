"""Experiment configuration: nested frozen dataclasses and the INI-style file format."""

from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

import pywt

from .backbone import EncoderConfig
from .data.synth import ARTIFACT_KINDS, CorpusSpec
from .ssm_classifier import ClassifierConfig
from .wavelet_prompt import COMPONENTS, SPARSIFY_MODES, check_layout

ROOT = Path(__file__).resolve().parent.parent
EXAMPLE_CONFIG = ROOT / "config.example.ini"

FILTER_MODES = ("learnable", "fixed")


@dataclass(frozen=True)
class PromptConfig:
    variant: str = "PartialWSPT"
    p: int = 10
    m: int = 4


@dataclass(frozen=True)
class WaveletConfig:
    family: str = "haar"
    filters: str = "learnable"
    rho: float = 0.1
    sparsify_mode: str = "gate"
    component: str = "full"
    # Weight of the perfect-reconstruction penalty in the loss.
    lambda_pr: float = 0.0


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 5e-4
    batch: int = 16
    dropout: float = 0.1
    max_epochs: int = 100
    patience: int = 7
    workers: int = 0


@dataclass(frozen=True)
class DataConfig:
    corpus: str = "corpus"
    chunk_s: float = 4.0
    frame_pool: int = 4
    n_train: int = 200
    n_dev: int = 50
    n_eval: int = 200
    min_dur: float = 3.0
    max_dur: float = 7.0
    artifacts: str = ",".join(ARTIFACT_KINDS)

    @property
    def artifact_kinds(self) -> tuple[str, ...]:
        return tuple(k.strip() for k in self.artifacts.split(",") if k.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 1234
    out: str = "runs/default"
    prompt: PromptConfig = field(default_factory=PromptConfig)
    wavelet: WaveletConfig = field(default_factory=WaveletConfig)
    encoder: EncoderConfig = field(default_factory=lambda: EncoderConfig(layers=4, d=64, heads=4, ff=128))
    classifier: ClassifierConfig = field(default_factory=lambda: ClassifierConfig(blocks=4, d_state=8, d_model=64))
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def validate(self) -> "ExperimentConfig":
        """Check every cross-field constraint; returns self so calls can chain."""
        check_layout(self.prompt.p, self.prompt.m, self.prompt.variant)
        w = self.wavelet
        if w.filters not in FILTER_MODES:
            raise ValueError(f"Unknown filter mode: {w.filters}. Must be one of {FILTER_MODES}")
        if w.family not in pywt.wavelist(kind="discrete") or not pywt.Wavelet(w.family).orthogonal:
            raise ValueError(f"Unknown wavelet family: {w.family}. Must be an orthogonal discrete wavelet")
        if not 0.0 <= w.rho <= 1.0:
            raise ValueError(f"sparsity ratio rho must lie in [0, 1], got {w.rho}")
        if w.sparsify_mode not in SPARSIFY_MODES:
            raise ValueError(f"Unknown sparsify mode: {w.sparsify_mode}. Must be one of {SPARSIFY_MODES}")
        if w.component not in COMPONENTS:
            raise ValueError(f"Unknown component: {w.component}. Must be one of {COMPONENTS}")
        if w.lambda_pr < 0:
            raise ValueError(f"lambda_pr must be non-negative, got {w.lambda_pr}")
        t = self.train
        if t.lr <= 0 or t.batch < 1 or t.max_epochs < 1 or t.patience < 1 or t.workers < 0:
            raise ValueError(f"invalid training settings: {t}")
        if not 0.0 <= t.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {t.dropout}")
        dc = self.data
        if dc.chunk_s <= 0 or dc.frame_pool < 1:
            raise ValueError(f"chunk_s must be positive and frame_pool >= 1, got {dc.chunk_s}, {dc.frame_pool}")
        for kind in dc.artifact_kinds:
            if kind not in ARTIFACT_KINDS:
                raise ValueError(f"Unknown artifact kind: {kind}. Must be one of {ARTIFACT_KINDS}")
        return self

    def corpus_spec(self) -> CorpusSpec:
        dc = self.data
        return CorpusSpec(
            n_train=dc.n_train,
            n_dev=dc.n_dev,
            n_eval=dc.n_eval,
            seed=self.seed,
            artifact_kinds=dc.artifact_kinds,
            min_dur=dc.min_dur,
            max_dur=dc.max_dur,
        )

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with whole sections or top-level fields swapped, e.g. replace(seed=7)."""
        return dataclasses.replace(self, **sections)

    def with_values(self, section: str, **values) -> "ExperimentConfig":
        """Copy with individual fields of one section changed."""
        current = getattr(self, section)
        return dataclasses.replace(self, **{section: dataclasses.replace(current, **values)})


SECTIONS = {
    "prompt": PromptConfig,
    "wavelet": WaveletConfig,
    "encoder": EncoderConfig,
    "classifier": ClassifierConfig,
    "train": TrainConfig,
    "data": DataConfig,
}
EXPERIMENT_KEYS = ("seed", "out")
BOOLEAN_STATES = configparser.ConfigParser.BOOLEAN_STATES


def _coerce(cls, key: str, raw: str):
    hints = typing.get_type_hints(cls)
    if key not in hints:
        names = [f.name for f in dataclasses.fields(cls)]
        raise ValueError(f"Unknown key: {key}. Must be one of {names}")
    kind = hints[key]
    if kind is bool:
        value = raw.strip().lower()
        if value not in BOOLEAN_STATES:
            raise ValueError(f"{key} = {raw!r} is not a valid bool. Use one of {sorted(BOOLEAN_STATES)}")
        return BOOLEAN_STATES[value]
    try:
        return kind(raw.strip())
    except ValueError:
        raise ValueError(f"{key} = {raw!r} is not a valid {kind.__name__}") from None


def load_config(path: Path | None = None) -> ExperimentConfig:
    """Read a config file; absent keys keep their defaults, unknown keys are errors."""
    if path is None:
        return ExperimentConfig().validate()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    parser.read(path, encoding="utf-8")

    base = ExperimentConfig()
    top = {}
    nested = {}
    for section in parser.sections():
        items = dict(parser.items(section))
        if section == "experiment":
            for key, raw in items.items():
                if key not in EXPERIMENT_KEYS:
                    raise ValueError(f"Unknown key: {key}. Must be one of {list(EXPERIMENT_KEYS)}")
                top[key] = _coerce(ExperimentConfig, key, raw)
        elif section in SECTIONS:
            cls = SECTIONS[section]
            values = {key: _coerce(cls, key, raw) for key, raw in items.items()}
            nested[section] = dataclasses.replace(getattr(base, section), **values)
        else:
            raise ValueError(f"Unknown section: [{section}]. Must be one of {['experiment', *SECTIONS]}")
    return dataclasses.replace(base, **top, **nested).validate()


def save_config(cfg: ExperimentConfig, path: Path) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["experiment"] = {key: str(getattr(cfg, key)) for key in EXPERIMENT_KEYS}
    for section in SECTIONS:
        parser[section] = {k: str(v) for k, v in dataclasses.asdict(getattr(cfg, section)).items()}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        parser.write(fh)


def to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def from_dict(values: dict) -> ExperimentConfig:
    top = {key: values[key] for key in EXPERIMENT_KEYS if key in values}
    nested = {name: cls(**values[name]) for name, cls in SECTIONS.items() if name in values}
    return ExperimentConfig(**top, **nested)


def full_scale() -> ExperimentConfig:
    """Nominal full-size configuration; used for closed-form parameter accounting only."""
    return ExperimentConfig(
        encoder=EncoderConfig(layers=24, d=1024, heads=16, ff=4096, extractor_params=4_200_000),
        classifier=ClassifierConfig(blocks=12, d_state=16, d_model=128),
        data=DataConfig(frame_pool=1),
    )
