import numpy as np
import pytest

from src.metrics import (
    ScoreSet,
    aggregate_chunks,
    auc_f1_acc,
    det_curve,
    eer,
    eer_ci,
    evaluate_scores,
    format_params,
    format_report,
    parse_report,
    read_scores,
    write_scores,
)

EXAMPLE = ScoreSet.from_arrays([0.9, 0.8, 0.4], [0.7, 0.3, 0.2])


def _brute_force_eer(bona, spoof):
    """min over thresholds of max(FAR, FRR), thresholds at every score and above the top."""
    scores = np.concatenate([bona, spoof])
    best = 1.0
    for t in [*np.unique(scores), scores.max() + 1.0]:
        far = np.mean([s >= t for s in spoof])
        frr = np.mean([s < t for s in bona])
        best = min(best, max(far, frr))
    return best


def _pairwise_auc(bona, spoof):
    wins = sum(1.0 if b > s else 0.5 if b == s else 0.0 for b in bona for s in spoof)
    return wins / (len(bona) * len(spoof))


def test_eer_small_example():
    rate, threshold = eer(EXAMPLE)
    assert rate == pytest.approx(1 / 3)
    assert threshold == pytest.approx(0.7)


def test_identical_scores_give_half():
    rate, _ = eer(ScoreSet.from_arrays([0.5] * 4, [0.5] * 6))
    assert rate == pytest.approx(0.5)


def test_perfect_separation_gives_zero():
    report = evaluate_scores(ScoreSet.from_arrays([0.9, 0.8, 0.7], [0.1, 0.2]))
    assert report.eer == 0.0
    assert report.auc == 1.0
    assert report.acc == 1.0
    assert report.eer_ci_halfwidth == 0.0


def test_reversed_scores_give_full_error():
    rate, _ = eer(ScoreSet.from_arrays([0.1, 0.2], [0.8, 0.9]))
    assert rate == pytest.approx(1.0)


def test_report_on_small_example():
    report = evaluate_scores(EXAMPLE)
    assert report.acc == pytest.approx(4 / 6)
    assert report.f1 == pytest.approx(2 / 3)
    assert report.auc == pytest.approx(8 / 9)
    assert (report.n_r, report.n_f) == (3, 3)


def test_det_curve_matches_loops():
    rng = np.random.default_rng(1)
    bona = np.round(rng.normal(1.0, 1.0, 40), 1)
    spoof = np.round(rng.normal(0.0, 1.0, 30), 1)
    thresholds, far, frr = det_curve(bona, spoof)
    for t, a, r in zip(thresholds, far, frr):
        assert a == pytest.approx(np.mean(spoof >= t))
        assert r == pytest.approx(np.mean(bona < t))
    assert (far[-1], frr[-1]) == (0.0, 1.0)


@pytest.mark.parametrize("seed", range(5))
def test_eer_matches_brute_force_on_continuous_scores(seed):
    rng = np.random.default_rng(seed)
    bona = rng.normal(1.0, 1.0, 37)
    spoof = rng.normal(0.0, 1.3, 53)
    rate, _ = eer(ScoreSet.from_arrays(bona, spoof))
    assert rate == pytest.approx(_brute_force_eer(bona, spoof), abs=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_auc_matches_pairwise_count_with_ties(seed):
    rng = np.random.default_rng(seed)
    bona = rng.integers(0, 6, 25).astype(float)
    spoof = rng.integers(0, 4, 20).astype(float)
    auc, _, _ = auc_f1_acc(ScoreSet.from_arrays(bona, spoof), 2.0)
    assert auc == pytest.approx(_pairwise_auc(bona, spoof))


def test_random_small_score_sets():
    r = np.random.default_rng(21)
    for _ in range(500):
        n_r, n_f = int(r.integers(1, 26)), int(r.integers(1, 26))
        bona, spoof = r.normal(0.7, 1.0, n_r), r.normal(0.0, 1.0, n_f)
        scores = ScoreSet.from_arrays(bona, spoof)
        rate, _ = eer(scores)
        assert rate == pytest.approx(_brute_force_eer(bona, spoof), abs=1e-12)
        tied_b, tied_s = np.round(bona), np.round(spoof)
        auc, _, _ = auc_f1_acc(ScoreSet.from_arrays(tied_b, tied_s), 0.0)
        assert auc == pytest.approx(_pairwise_auc(tied_b, tied_s), abs=1e-12)


def test_auc_is_one_exactly_when_eer_is_zero():
    r = np.random.default_rng(31)
    seen = set()
    for _ in range(300):
        n_r, n_f = int(r.integers(1, 21)), int(r.integers(1, 21))
        shift = r.choice([0.5, 2.0, 6.0])
        scores = ScoreSet.from_arrays(r.normal(shift, 1.0, n_r), r.normal(0.0, 1.0, n_f))
        auc, _, _ = auc_f1_acc(scores, 0.0)
        rate, _ = eer(scores)
        assert (auc == 1.0) == (rate == 0.0)
        seen.add(auc == 1.0)
    assert seen == {True, False}


def test_metrics_invariant_under_monotone_transform():
    rng = np.random.default_rng(4)
    bona, spoof = rng.normal(0.5, 1.0, 30), rng.normal(0.0, 1.0, 30)
    base = evaluate_scores(ScoreSet.from_arrays(bona, spoof))
    moved = evaluate_scores(ScoreSet.from_arrays(np.exp(3 * bona) + 2, np.exp(3 * spoof) + 2))
    assert moved.eer == pytest.approx(base.eer)
    assert moved.auc == pytest.approx(base.auc)


def test_eer_ci_halfwidth():
    assert eer_ci(0.1, 100, 100) == pytest.approx(0.04158, abs=1e-5)
    assert eer_ci(0.0, 10, 10) == 0.0


@pytest.mark.parametrize(("args", "match"), [((1.2, 10, 10), "EER"), ((0.1, 0, 10), "sample counts")])
def test_eer_ci_validation(args, match):
    with pytest.raises(ValueError, match=match):
        eer_ci(*args)


def test_single_class_rejected():
    with pytest.raises(ValueError, match="both classes"):
        eer(ScoreSet.from_arrays([0.1, 0.2], []))


def test_unknown_label_rejected():
    with pytest.raises(ValueError, match="Unknown label"):
        ScoreSet([("u1", 0.3, "fake")])


def test_aggregation_is_mean_and_order_free():
    chunks = [
        ("u2", 1.0, "spoof"),
        ("u1", 0.5, "bonafide"),
        ("u1", 1.5, "bonafide"),
        ("u2", -2.0, "spoof"),
        ("u1", 0.25, "bonafide"),
    ]
    expected = ScoreSet([("u1", 0.75, "bonafide"), ("u2", -0.5, "spoof")])
    assert aggregate_chunks(chunks) == expected
    rng = np.random.default_rng(0)
    for _ in range(5):
        assert aggregate_chunks([chunks[i] for i in rng.permutation(len(chunks))]) == expected


def test_aggregation_rejects_conflicting_labels():
    with pytest.raises(ValueError, match="conflicting labels"):
        aggregate_chunks([("u1", 0.1, "bonafide"), ("u1", 0.2, "spoof")])


def test_score_file_round_trip(tmp_path):
    scores = ScoreSet([("eval-bonafide-0001", 1.2345678, "bonafide"), ("eval-spoof-0001", -0.5, "spoof")])
    path = tmp_path / "scores_eval.txt"
    write_scores(path, scores)
    assert path.read_bytes() == b"eval-bonafide-0001 1.234568 bonafide\neval-spoof-0001 -0.500000 spoof\n"
    back = read_scores(path)
    assert [e[0] for e in back.entries] == ["eval-bonafide-0001", "eval-spoof-0001"]
    assert back.entries[0][1] == pytest.approx(1.234568)


def test_missing_score_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_scores(tmp_path / "nope.txt")


def test_report_text_round_trip():
    report = evaluate_scores(EXAMPLE)
    text = format_report(report, "eval")
    assert text.startswith("# split: eval\n# positive class for F1: bonafide\n")
    values = parse_report(text)
    assert values["eer"] == pytest.approx(report.eer)
    assert values["n_f"] == 3


def test_format_params():
    assert format_params(1_911_946, 0.61992) == "1.912M (0.620%)"
    assert format_params(4_146_000, 1.2976) == "4.146M (1.298%)"
