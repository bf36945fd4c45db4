from dataclasses import dataclass

import pytest

from src.config import (
    EXAMPLE_CONFIG,
    ExperimentConfig,
    _coerce,
    from_dict,
    full_scale,
    load_config,
    save_config,
    to_dict,
)
from src.metrics import format_params
from src.model import closed_form_counts


def test_example_file_matches_defaults():
    assert load_config(EXAMPLE_CONFIG) == ExperimentConfig()


def test_no_path_gives_defaults():
    cfg = load_config(None)
    assert cfg.prompt.variant == "PartialWSPT" and (cfg.prompt.p, cfg.prompt.m) == (10, 4)
    assert cfg.wavelet.rho == 0.1
    assert cfg.train.patience == 7
    assert (cfg.classifier.blocks, cfg.classifier.d_model, cfg.classifier.d_state) == (4, 64, 8)


def test_save_load_round_trip(tiny_cfg, tmp_path):
    path = tmp_path / "config.ini"
    save_config(tiny_cfg, path)
    assert load_config(path) == tiny_cfg


def test_dict_round_trip(tiny_cfg):
    assert from_dict(to_dict(tiny_cfg)) == tiny_cfg


def test_partial_file_keeps_other_defaults(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[wavelet]\nrho = 0.5\nfamily = db2\n\n[experiment]\nseed = 9\n")
    cfg = load_config(path)
    assert cfg.wavelet.rho == 0.5 and cfg.wavelet.family == "db2" and cfg.seed == 9
    assert cfg.prompt == ExperimentConfig().prompt


@pytest.mark.parametrize(
    ("text", "match"),
    [
        ("[wavelet]\nalpha = 1\n", "Unknown key: alpha"),
        ("[optimizer]\nlr = 1\n", r"Unknown section: \[optimizer\]"),
        ("[train]\nbatch = many\n", "not a valid int"),
        ("[prompt]\nvariant = WSPT\n", "must equal p"),
        ("[wavelet]\nfamily = bior2.2\n", "orthogonal"),
        ("[wavelet]\nfilters = frozen\n", "Unknown filter mode"),
        ("[train]\ndropout = 1.0\n", "dropout"),
        ("[data]\nartifacts = vocoder\n", "Unknown artifact kind"),
    ],
)
def test_invalid_files(tmp_path, text, match):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(ValueError, match=match):
        load_config(path)


@dataclass(frozen=True)
class _Switches:
    enabled: bool = True


@pytest.mark.parametrize(("raw", "expected"), [("true", True), ("On", True), ("0", False), (" no ", False)])
def test_boolean_values(raw, expected):
    assert _coerce(_Switches, "enabled", raw) is expected


def test_misspelt_boolean_rejected():
    with pytest.raises(ValueError, match="not a valid bool"):
        _coerce(_Switches, "enabled", "ture")


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "absent.ini")


def test_with_values_changes_one_field(tiny_cfg):
    changed = tiny_cfg.with_values("wavelet", rho=0.7)
    assert changed.wavelet.rho == 0.7
    assert changed.wavelet.family == tiny_cfg.wavelet.family
    assert tiny_cfg.wavelet.rho == 0.1


def test_full_scale_counts():
    trainable, total, percent = closed_form_counts(full_scale())
    assert trainable == 1_911_946
    assert total == 308_421_322
    assert percent < 2.0
    assert format_params(trainable, percent) == "1.912M (0.620%)"


def test_full_scale_prompt_only_share_is_smaller():
    cfg = full_scale()
    pt, _, _ = closed_form_counts(cfg.with_values("prompt", variant="PT", m=0))
    pwspt, _, _ = closed_form_counts(cfg)
    assert pwspt - pt == 8
