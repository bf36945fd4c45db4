"""Versioned checkpoint: magic header followed by an npz archive."""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .config import ExperimentConfig, from_dict, to_dict

MAGIC = b"WSPNET1\n"
VERSION = 1
# Fixed zip timestamp so identical checkpoints are identical bytes.
ZIP_DATE = (1980, 1, 1, 0, 0, 0)
HISTORY_COLUMNS = ["epoch", "train_loss", "dev_loss", "dev_eer"]


@dataclass
class Checkpoint:
    config: ExperimentConfig
    state: dict[str, np.ndarray]
    optimizer: dict[str, np.ndarray] = field(default_factory=dict)
    best_dev_eer: float = float("nan")
    best_epoch: int = 0
    history: list[dict] = field(default_factory=list)

    @property
    def backbone_seed(self) -> int:
        return self.config.encoder.seed

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.history, columns=HISTORY_COLUMNS)


def _npz_bytes(arrays: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            info = zipfile.ZipInfo(f"{name}.npy", date_time=ZIP_DATE)
            with zf.open(info, "w", force_zip64=True) as fh:
                np.lib.format.write_array(fh, np.asanyarray(arrays[name]), allow_pickle=False)
    return buf.getvalue()


def dumps(ckpt: Checkpoint) -> bytes:
    meta = {
        "version": VERSION,
        "config": to_dict(ckpt.config),
        "backbone_seed": ckpt.backbone_seed,
        "best_dev_eer": ckpt.best_dev_eer,
        "best_epoch": ckpt.best_epoch,
        "history": ckpt.history,
    }
    arrays = {"meta": np.array(json.dumps(meta, sort_keys=True))}
    arrays.update({f"model/{k}": v for k, v in ckpt.state.items()})
    arrays.update({f"optim/{k}": v for k, v in ckpt.optimizer.items()})
    return MAGIC + _npz_bytes(arrays)


def loads(blob: bytes) -> Checkpoint:
    if not blob.startswith(MAGIC):
        raise ValueError(f"not a checkpoint: expected header {MAGIC!r}, got {blob[:len(MAGIC)]!r}")
    with np.load(io.BytesIO(blob[len(MAGIC):]), allow_pickle=False) as archive:
        meta = json.loads(str(archive["meta"]))
        if meta["version"] != VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}, expected {VERSION}")
        state = {k.removeprefix("model/"): archive[k] for k in archive.files if k.startswith("model/")}
        optimizer = {k.removeprefix("optim/"): archive[k] for k in archive.files if k.startswith("optim/")}
    return Checkpoint(
        config=from_dict(meta["config"]),
        state=state,
        optimizer=optimizer,
        best_dev_eer=meta["best_dev_eer"],
        best_epoch=meta["best_epoch"],
        history=meta["history"],
    )


def save_checkpoint(ckpt: Checkpoint, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(ckpt))
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return loads(path.read_bytes())
