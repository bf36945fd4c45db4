"""ChromaDB store for exported utterance embeddings."""

from pathlib import Path

import chromadb
import numpy as np

ROOT = Path(__file__).resolve().parent.parent
DB_PATH = ROOT / "chromadb_data"

COLLECTIONS = ["train", "dev", "eval"]

_clients = {}


def _get_client(path: Path | None = None):
    key = str(path or DB_PATH)
    if key not in _clients:
        _clients[key] = chromadb.PersistentClient(path=key)
    return _clients[key]


def get_collection(split: str, path: Path | None = None):
    if split not in COLLECTIONS:
        raise ValueError(f"Unknown collection: {split}. Must be one of {COLLECTIONS}")
    return _get_client(path).get_or_create_collection(
        name=f"embeddings_{split}",
        metadata={"hnsw:space": "cosine"},
    )


def index_embeddings(
    split: str,
    utt_ids: list[str],
    labels: list[str],
    vectors: np.ndarray,
    path: Path | None = None,
) -> int:
    """Upsert one vector per utterance; returns the collection size."""
    col = get_collection(split, path)
    # ChromaDB has a batch size limit; chunk into batches of 100
    batch_size = 100
    for i in range(0, len(utt_ids), batch_size):
        col.upsert(
            ids=utt_ids[i:i + batch_size],
            embeddings=[v.tolist() for v in vectors[i:i + batch_size]],
            metadatas=[{"label": label, "split": split} for label in labels[i:i + batch_size]],
        )
    return col.count()


def neighbors(split: str, utt_id: str, n_results: int = 5, path: Path | None = None) -> list[dict]:
    """Nearest utterances to `utt_id` by cosine distance. Returns list of {id, label, distance}."""
    col = get_collection(split, path)
    if col.count() == 0:
        return []
    found = col.get(ids=[utt_id], include=["embeddings"])
    if not found["ids"]:
        raise ValueError(f"Unknown utterance: {utt_id} is not indexed in {split}")
    results = col.query(
        query_embeddings=[list(found["embeddings"][0])],
        n_results=min(n_results + 1, col.count()),
        include=["metadatas", "distances"],
    )
    items = []
    for i in range(len(results["ids"][0])):
        if results["ids"][0][i] == utt_id:
            continue
        items.append({
            "id": results["ids"][0][i],
            "label": results["metadatas"][0][i]["label"],
            "distance": results["distances"][0][i],
        })
    return items[:n_results]


def label_purity(split: str, n_results: int = 5, path: Path | None = None) -> float:
    """Fraction of nearest neighbours sharing the query's label, over the whole collection."""
    col = get_collection(split, path)
    data = col.get(include=["metadatas"])
    if not data["ids"]:
        return float("nan")
    hits = total = 0
    for utt_id, meta in zip(data["ids"], data["metadatas"]):
        for item in neighbors(split, utt_id, n_results, path):
            hits += item["label"] == meta["label"]
            total += 1
    return hits / total if total else float("nan")
