"""Detection metrics: EER with a parametric confidence interval, ACC, F1, AUC.

Scores follow the convention "higher means more bonafide". F1 treats bonafide
as the positive class.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd
from scipy.stats import rankdata

LABELS = ("bonafide", "spoof")
Z_95 = 1.96


@dataclass
class ScoreSet:
    entries: list[tuple[str, float, str]] = field(default_factory=list)

    def __post_init__(self):
        for utt_id, _, label in self.entries:
            if label not in LABELS:
                raise ValueError(f"Unknown label {label!r} for {utt_id}. Must be one of {LABELS}")

    @classmethod
    def from_arrays(cls, bonafide: Iterable[float], spoof: Iterable[float]) -> "ScoreSet":
        entries = [(f"b{i:05d}", float(s), "bonafide") for i, s in enumerate(bonafide)]
        entries += [(f"s{i:05d}", float(s), "spoof") for i, s in enumerate(spoof)]
        return cls(entries)

    @property
    def n_r(self) -> int:
        return sum(1 for _, _, label in self.entries if label == "bonafide")

    @property
    def n_f(self) -> int:
        return sum(1 for _, _, label in self.entries if label == "spoof")

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        """(bonafide scores, spoof scores)."""
        bona = np.array([s for _, s, label in self.entries if label == "bonafide"], dtype=np.float64)
        spoof = np.array([s for _, s, label in self.entries if label == "spoof"], dtype=np.float64)
        return bona, spoof


@dataclass
class EvalReport:
    eer: float
    eer_ci_halfwidth: float
    threshold: float
    acc: float
    f1: float
    auc: float
    n_r: int
    n_f: int

    def as_dict(self) -> dict:
        return asdict(self)


def _require_both_classes(bona: np.ndarray, spoof: np.ndarray) -> None:
    if bona.size == 0 or spoof.size == 0:
        raise ValueError(
            f"metrics need both classes, got {bona.size} bonafide and {spoof.size} spoof scores"
        )


def det_curve(bona: np.ndarray, spoof: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(thresholds, FAR, FRR) at every distinct score plus one point above the maximum.

    FAR(t) is the fraction of spoof scores >= t, FRR(t) the fraction of bonafide
    scores < t. The extra point rejects everything (FAR = 0, FRR = 1).
    """
    _require_both_classes(bona, spoof)
    distinct = np.unique(np.concatenate([bona, spoof]))
    thresholds = np.append(distinct, distinct[-1] + 1.0)
    spoof_sorted, bona_sorted = np.sort(spoof), np.sort(bona)
    far = (spoof.size - np.searchsorted(spoof_sorted, thresholds, side="left")) / spoof.size
    frr = np.searchsorted(bona_sorted, thresholds, side="left") / bona.size
    return thresholds, far, frr


def eer(scores: ScoreSet) -> tuple[float, float]:
    """Equal error rate and its threshold.

    Interpolates linearly between the two adjacent operating points where
    FAR - FRR changes sign; an exact crossing at several thresholds resolves to
    the lowest one.
    """
    bona, spoof = scores.split()
    thresholds, far, frr = det_curve(bona, spoof)
    diff = far - frr
    i = int(np.argmax(diff <= 0))
    if diff[i] == 0 or i == 0:
        return float(far[i]), float(thresholds[i])
    alpha = diff[i - 1] / (diff[i - 1] - diff[i])
    rate = far[i - 1] + alpha * (far[i] - far[i - 1])
    threshold = thresholds[i - 1] + alpha * (thresholds[i] - thresholds[i - 1])
    return float(rate), float(threshold)


def eer_ci(eer_value: float, n_r: int, n_f: int) -> float:
    """Half-width of the 95% parametric interval: 1.96 * 0.5 * sqrt(e(1-e)(n_r+n_f)/(n_r n_f))."""
    if not 0.0 <= eer_value <= 1.0:
        raise ValueError(f"EER must lie in [0, 1], got {eer_value}")
    if n_r < 1 or n_f < 1:
        raise ValueError(f"sample counts must be positive, got n_r={n_r}, n_f={n_f}")
    sigma = 0.5 * math.sqrt(eer_value * (1.0 - eer_value) * (n_r + n_f) / (n_r * n_f))
    return Z_95 * sigma


def auc_f1_acc(scores: ScoreSet, threshold: float) -> tuple[float, float, float]:
    """Rank-statistic AUC (ties count one half); ACC and F1 at `threshold`."""
    bona, spoof = scores.split()
    _require_both_classes(bona, spoof)
    ranks = rankdata(np.concatenate([bona, spoof]))
    n_r, n_f = bona.size, spoof.size
    auc = (ranks[:n_r].sum() - n_r * (n_r + 1) / 2.0) / (n_r * n_f)

    tp = int(np.sum(bona >= threshold))
    fn = n_r - tp
    fp = int(np.sum(spoof >= threshold))
    tn = n_f - fp
    acc = (tp + tn) / (n_r + n_f)
    f1 = 2 * tp / (2 * tp + fp + fn) if tp + fp + fn else 0.0
    return float(auc), float(f1), float(acc)


def evaluate_scores(scores: ScoreSet) -> EvalReport:
    rate, threshold = eer(scores)
    auc, f1, acc = auc_f1_acc(scores, threshold)
    n_r, n_f = scores.n_r, scores.n_f
    return EvalReport(
        eer=rate,
        eer_ci_halfwidth=eer_ci(rate, n_r, n_f),
        threshold=threshold,
        acc=acc,
        f1=f1,
        auc=auc,
        n_r=n_r,
        n_f=n_f,
    )


def aggregate_chunks(chunks: Iterable[tuple[str, float, str]]) -> ScoreSet:
    """Utterance score = mean of its chunk scores (exactly rounded, order-free)."""
    grouped: dict[str, list[float]] = defaultdict(list)
    labels: dict[str, str] = {}
    for utt_id, score, label in chunks:
        if labels.setdefault(utt_id, label) != label:
            raise ValueError(f"chunks of {utt_id} carry conflicting labels")
        grouped[utt_id].append(float(score))
    return ScoreSet(
        [(utt, math.fsum(vals) / len(vals), labels[utt]) for utt, vals in sorted(grouped.items())]
    )


# ── Files ─────────────────────────────────────────────────────────────────────


def write_scores(path: Path, scores: ScoreSet) -> None:
    lines = [f"{utt} {score:.6f} {label}\n" for utt, score, label in scores.entries]
    Path(path).write_text("".join(lines), encoding="ascii", newline="\n")


def read_scores(path: Path) -> ScoreSet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"score file not found: {path}")
    df = pd.read_csv(
        path, sep=" ", header=None, names=["utt_id", "score", "label"],
        dtype={"utt_id": str, "score": np.float64, "label": str},
    )
    return ScoreSet(list(df.itertuples(index=False, name=None)))


def format_report(report: EvalReport, split: str = "") -> str:
    """`metric = value` lines; header names the F1 positive class."""
    header = f"# split: {split}\n" if split else ""
    header += "# positive class for F1: bonafide\n"
    body = "".join(f"{key} = {value}\n" for key, value in report.as_dict().items())
    return header + body


def parse_report(text: str) -> dict[str, float]:
    values = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        values[key.strip()] = float(value)
    return values


def format_params(trainable: int, percent: float) -> str:
    """Table-style parameter string, e.g. '4.146M (1.298%)'."""
    return f"{trainable / 1e6:.3f}M ({percent:.3f}%)"
