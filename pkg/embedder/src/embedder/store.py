"""Writer for the alforge dataset-store directory format.

This is a from-scratch implementation of the documented wire format, kept
independent of the consumer package: the on-disk layout is the contract.

    manifest.json   flat UTF-8 JSON (dataset_name, model_name, pooling,
                    num_train, num_test, num_classes, embedding_dim, budget,
                    source_checksum, optional extras object)
    train.emb / test.emb   magic "ALEB", u32 version=1, u64 rows, u32 dim,
                    u8 dtype code (1 = float32), little-endian f32 payload
    train.lbl / test.lbl   magic "ALLB", u32 version=1, u64 rows,
                    little-endian u32 class indices

source_checksum = SHA-256 over the payload files in the order
train.emb, train.lbl, test.emb, test.lbl.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np


def encode_embeddings(matrix: np.ndarray) -> bytes:
    mat = np.ascontiguousarray(matrix, dtype="<f4")
    if mat.ndim != 2:
        raise ValueError(f"embedding matrix must be 2-D, got {mat.ndim}-D")
    header = struct.pack("<4sIQIB", b"ALEB", 1, mat.shape[0], mat.shape[1], 1)
    return header + mat.tobytes()


def encode_labels(labels: np.ndarray) -> bytes:
    vec = np.ascontiguousarray(labels, dtype="<u4")
    if vec.ndim != 1:
        raise ValueError(f"label vector must be 1-D, got {vec.ndim}-D")
    header = struct.pack("<4sIQ", b"ALLB", 1, vec.shape[0])
    return header + vec.tobytes()


def write_dataset_dir(
    out_dir,
    *,
    dataset_name: str,
    model_name: str,
    pooling: str,
    budget: int,
    train: np.ndarray,
    train_labels: np.ndarray,
    test: np.ndarray,
    test_labels: np.ndarray,
    num_classes: int,
    extras: dict | None = None,
) -> Path:
    """Write one dataset directory; returns its path."""
    payloads = {
        "train.emb": encode_embeddings(train),
        "train.lbl": encode_labels(train_labels),
        "test.emb": encode_embeddings(test),
        "test.lbl": encode_labels(test_labels),
    }
    digest = hashlib.sha256()
    for blob in payloads.values():
        digest.update(blob)

    manifest = {
        "dataset_name": dataset_name,
        "model_name": model_name,
        "pooling": pooling,
        "num_train": int(train.shape[0]),
        "num_test": int(test.shape[0]),
        "num_classes": int(num_classes),
        "embedding_dim": int(train.shape[1]),
        "budget": int(budget),
        "source_checksum": digest.hexdigest(),
    }
    if extras:
        manifest["extras"] = extras

    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    for filename, blob in payloads.items():
        (directory / filename).write_bytes(blob)
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    return directory
