import numpy as np
import pytest

from src import db


@pytest.fixture
def store(tmp_path):
    return tmp_path / "chromadb_data"


def _clusters():
    rng = np.random.default_rng(0)
    bona = rng.normal(0.0, 0.05, (4, 8)) + np.eye(8)[0]
    spoof = rng.normal(0.0, 0.05, (4, 8)) + np.eye(8)[1]
    ids = [f"eval-bonafide-{i:04d}" for i in range(4)] + [f"eval-spoof-{i:04d}" for i in range(4)]
    labels = ["bonafide"] * 4 + ["spoof"] * 4
    return ids, labels, np.vstack([bona, spoof])


def test_index_is_idempotent(store):
    ids, labels, vectors = _clusters()
    assert db.index_embeddings("eval", ids, labels, vectors, store) == 8
    assert db.index_embeddings("eval", ids, labels, vectors, store) == 8


def test_neighbours_share_the_cluster(store):
    ids, labels, vectors = _clusters()
    db.index_embeddings("eval", ids, labels, vectors, store)
    found = db.neighbors("eval", "eval-spoof-0002", 3, store)
    assert len(found) == 3
    assert all(item["label"] == "spoof" for item in found)
    assert "eval-spoof-0002" not in [item["id"] for item in found]
    assert db.label_purity("eval", 3, store) == pytest.approx(1.0)


def test_unknown_utterance_and_split(store):
    ids, labels, vectors = _clusters()
    db.index_embeddings("eval", ids, labels, vectors, store)
    with pytest.raises(ValueError, match="not indexed"):
        db.neighbors("eval", "eval-spoof-9999", 3, store)
    with pytest.raises(ValueError, match="Unknown collection"):
        db.get_collection("test", store)


def test_empty_collection(store):
    assert db.neighbors("dev", "dev-spoof-0000", 3, store) == []
    assert np.isnan(db.label_purity("dev", 3, store))
