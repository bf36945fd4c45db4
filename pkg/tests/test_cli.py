import pytest

from src.cli import _parse_values, build_parser, main
from src.config import save_config
from src.trainer import CHECKPOINT_NAME


def test_params_full_prints_closed_form(capsys):
    assert main(["params", "--full"]) == 0
    out = capsys.readouterr().out
    assert "1.912M (0.620%)" in out
    assert "PartialWSPT" in out and "FourierPT" in out


def test_desk_params_lists_every_variant(capsys):
    assert main(["params"]) == 0
    out = capsys.readouterr().out
    for variant in ("PT", "WPT", "WSPT", "PartialWSPT"):
        assert variant in out


def test_unknown_config_key_exits_with_status_one(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[wavelet]\nbeta = 2\n")
    with pytest.raises(SystemExit) as exc:
        main(["params", "--config", str(path)])
    assert exc.value.code == 1
    assert "Unknown key: beta" in capsys.readouterr().out


def test_missing_checkpoint_exits_with_status_one(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["eval", "--checkpoint", str(tmp_path / CHECKPOINT_NAME)])
    assert exc.value.code == 1


def test_missing_corpus_exits_with_status_one(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--out", str(tmp_path / "run"), "--corpus", str(tmp_path / "nowhere")])
    assert exc.value.code == 1


@pytest.mark.parametrize(
    ("axis", "text", "expected"),
    [
        ("m", "2-5", [2, 3, 4, 5]),
        ("m", "2,4, 6", [2, 4, 6]),
        ("rho", "0.1,0.5", [0.1, 0.5]),
        ("component", "no_lwd,no_wds", ["no_lwd", "no_wds"]),
    ],
)
def test_parse_ablation_values(axis, text, expected):
    assert _parse_values(text, axis) == expected


def test_parser_common_flags():
    args = build_parser().parse_args(["ablate", "rho", "0.1", "--seed", "3", "--out", "runs/x", "-v"])
    assert (args.axis, args.seed, args.verbose) == ("rho", 3, True)


@pytest.mark.slow
def test_train_eval_export_end_to_end(corpus_cfg, tmp_path, capsys):
    cfg_path = tmp_path / "tiny.ini"
    save_config(corpus_cfg, cfg_path)
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg_path), "--out", str(run)]) == 0
    assert (run / CHECKPOINT_NAME).exists()
    capsys.readouterr()
    assert main(["eval", "--config", str(cfg_path), "--out", str(run), "--split", "eval"]) == 0
    assert "positive class for F1: bonafide" in capsys.readouterr().out
    assert (run / "scores_eval.txt").exists()
    assert main(["export-emb", "--config", str(cfg_path), "--out", str(run), "--index", "-n", "2"]) == 0
    assert len((run / "embeddings_eval.txt").read_text().splitlines()) == 6
