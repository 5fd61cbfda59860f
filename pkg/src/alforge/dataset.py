"""On-disk store for frozen embedding datasets.

A dataset directory contains five files:

    manifest.json   flat UTF-8 JSON, keys exactly the DatasetManifest fields
    train.emb       float32 feature matrix, one row per training text
    test.emb        float32 feature matrix, one row per test text
    train.lbl       uint32 class indices for the training rows
    test.lbl        uint32 class indices for the test rows

``.emb`` layout: magic ``ALEB``, u32 version (1), u64 row count, u32 dim,
u8 dtype code (1 = float32), then row-major little-endian float32 values.
``.lbl`` layout: magic ``ALLB``, u32 version (1), u64 row count, then
little-endian u32 class indices.

``source_checksum`` in the manifest is the SHA-256 hex digest of the four
payload files concatenated in the order train.emb, train.lbl, test.emb,
test.lbl.  Loading verifies it; runners re-verify it after a full
experiment to prove the in-memory matrices were never mutated.

Feature values are stored exactly as produced: no normalization happens at
ingest (strategies that need unit-norm features normalize internally).
Loaded arrays are marked read-only and shared across experiments.
"""

import hashlib
import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError

EMB_MAGIC = b"ALEB"
LBL_MAGIC = b"ALLB"
FORMAT_VERSION = 1
DTYPE_F32 = 1

POOLING_MODES = ("CLS", "EOS", "MEAN")

_MANIFEST_FIELDS = (
    "dataset_name",
    "model_name",
    "pooling",
    "num_train",
    "num_test",
    "num_classes",
    "embedding_dim",
    "budget",
    "source_checksum",
)


@dataclass(frozen=True)
class DatasetManifest:
    """Identity and shape metadata for one (dataset, embedding model) pair."""

    dataset_name: str
    model_name: str
    pooling: str
    num_train: int
    num_test: int
    num_classes: int
    embedding_dim: int
    budget: int
    source_checksum: str = ""
    extras: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.pooling not in POOLING_MODES:
            raise ValidationError(
                f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}"
            )
        if self.num_train < 1:
            raise ValidationError("num_train must be ≥ 1")
        if self.num_test < 1:
            raise ValidationError("num_test must be ≥ 1")
        if self.num_classes < 2:
            raise ValidationError(f"num_classes must be ≥ 2, got {self.num_classes}")
        if self.embedding_dim < 1:
            raise ValidationError(f"embedding_dim must be ≥ 1, got {self.embedding_dim}")
        if not 1 <= self.budget <= self.num_train:
            raise ValidationError(
                f"budget must lie in [1, num_train={self.num_train}], got {self.budget}"
            )

    def to_json(self) -> str:
        doc = {name: getattr(self, name) for name in _MANIFEST_FIELDS}
        if self.extras:
            doc["extras"] = self.extras
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"manifest.json is not valid JSON: {exc}") from exc
        missing = [name for name in _MANIFEST_FIELDS if name not in doc]
        if missing:
            raise ValidationError(f"manifest.json missing keys: {missing}")
        return cls(
            dataset_name=str(doc["dataset_name"]),
            model_name=str(doc["model_name"]),
            pooling=str(doc["pooling"]),
            num_train=int(doc["num_train"]),
            num_test=int(doc["num_test"]),
            num_classes=int(doc["num_classes"]),
            embedding_dim=int(doc["embedding_dim"]),
            budget=int(doc["budget"]),
            source_checksum=str(doc["source_checksum"]),
            extras=dict(doc.get("extras", {})),
        )


@dataclass(frozen=True)
class EmbeddingDataset:
    """A loaded dataset: manifest plus read-only feature and label arrays."""

    manifest: DatasetManifest
    train: np.ndarray
    train_labels: np.ndarray
    test: np.ndarray
    test_labels: np.ndarray

    @property
    def num_train(self) -> int:
        return self.manifest.num_train

    def payload_checksum(self) -> str:
        """Recompute the manifest checksum from the in-memory arrays."""
        return _checksum(
            encode_embeddings(self.train),
            encode_labels(self.train_labels),
            encode_embeddings(self.test),
            encode_labels(self.test_labels),
        )


def _checksum(*payloads: bytes) -> str:
    h = hashlib.sha256()
    for blob in payloads:
        h.update(blob)
    return h.hexdigest()


def _as_feature_matrix(array, name: str) -> np.ndarray:
    mat = np.asarray(array, dtype=np.float32)
    if mat.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D matrix, got ndim={mat.ndim}")
    if not np.isfinite(mat).all():
        raise ValidationError(f"{name} contains non-finite values")
    return mat


def _as_label_vector(array, name: str, num_classes: int) -> np.ndarray:
    vec = np.asarray(array)
    if vec.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got ndim={vec.ndim}")
    if vec.size and (not np.issubdtype(vec.dtype, np.integer)):
        if not np.array_equal(vec, vec.astype(np.int64)):
            raise ValidationError(f"{name} must hold integer class indices")
    vec = vec.astype(np.int64)
    if vec.size and (vec.min() < 0 or vec.max() >= num_classes):
        raise ValidationError(
            f"label out of range in {name}: values must lie in [0, {num_classes})"
        )
    return vec


def encode_embeddings(matrix: np.ndarray) -> bytes:
    """Serialize a float32 matrix to the ``.emb`` container format."""
    mat = np.ascontiguousarray(matrix, dtype="<f4")
    header = struct.pack(
        "<4sIQIB", EMB_MAGIC, FORMAT_VERSION, mat.shape[0], mat.shape[1], DTYPE_F32
    )
    return header + mat.tobytes()


def decode_embeddings(blob: bytes, name: str) -> np.ndarray:
    header_size = struct.calcsize("<4sIQIB")
    if len(blob) < header_size:
        raise ValidationError(f"{name}: file too short for header")
    magic, version, rows, dim, dtype_code = struct.unpack_from("<4sIQIB", blob)
    if magic != EMB_MAGIC:
        raise ValidationError(f"{name}: bad magic bytes {magic!r}")
    if version != FORMAT_VERSION:
        raise ValidationError(f"{name}: unsupported version {version}")
    if dtype_code != DTYPE_F32:
        raise ValidationError(f"{name}: unsupported dtype code {dtype_code}")
    expected = header_size + rows * dim * 4
    if len(blob) != expected:
        raise ValidationError(
            f"{name}: shape mismatch, header promises {rows}x{dim} "
            f"({expected} bytes) but file has {len(blob)} bytes"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=header_size)
    return data.reshape(rows, dim)


def encode_labels(labels: np.ndarray) -> bytes:
    """Serialize a class-index vector to the ``.lbl`` container format."""
    vec = np.ascontiguousarray(labels, dtype="<u4")
    header = struct.pack("<4sIQ", LBL_MAGIC, FORMAT_VERSION, vec.shape[0])
    return header + vec.tobytes()


def decode_labels(blob: bytes, name: str) -> np.ndarray:
    header_size = struct.calcsize("<4sIQ")
    if len(blob) < header_size:
        raise ValidationError(f"{name}: file too short for header")
    magic, version, rows = struct.unpack_from("<4sIQ", blob)
    if magic != LBL_MAGIC:
        raise ValidationError(f"{name}: bad magic bytes {magic!r}")
    if version != FORMAT_VERSION:
        raise ValidationError(f"{name}: unsupported version {version}")
    expected = header_size + rows * 4
    if len(blob) != expected:
        raise ValidationError(
            f"{name}: shape mismatch, header promises {rows} labels "
            f"({expected} bytes) but file has {len(blob)} bytes"
        )
    data = np.frombuffer(blob, dtype="<u4", offset=header_size)
    return data.astype(np.int64)


def write_dataset(
    manifest: DatasetManifest,
    train,
    train_labels,
    test,
    test_labels,
    path,
) -> DatasetManifest:
    """Validate and persist a dataset directory.

    The manifest's ``source_checksum`` is computed here from the payload
    bytes; any caller-supplied value is replaced.  Returns the manifest as
    written, so callers can compare round-trips exactly.
    """
    train = _as_feature_matrix(train, "train")
    test = _as_feature_matrix(test, "test")
    if train.shape[0] < 1:
        raise ValidationError("num_train must be ≥ 1")
    manifest.validate()
    if train.shape != (manifest.num_train, manifest.embedding_dim):
        raise ValidationError(
            f"train shape {train.shape} does not match manifest "
            f"({manifest.num_train}, {manifest.embedding_dim})"
        )
    if test.shape != (manifest.num_test, manifest.embedding_dim):
        raise ValidationError(
            f"test shape {test.shape} does not match manifest "
            f"({manifest.num_test}, {manifest.embedding_dim})"
        )
    train_labels = _as_label_vector(train_labels, "train_labels", manifest.num_classes)
    test_labels = _as_label_vector(test_labels, "test_labels", manifest.num_classes)
    if train_labels.shape[0] != manifest.num_train:
        raise ValidationError(
            f"train_labels length {train_labels.shape[0]} != num_train {manifest.num_train}"
        )
    if test_labels.shape[0] != manifest.num_test:
        raise ValidationError(
            f"test_labels length {test_labels.shape[0]} != num_test {manifest.num_test}"
        )

    payloads = {
        "train.emb": encode_embeddings(train),
        "train.lbl": encode_labels(train_labels),
        "test.emb": encode_embeddings(test),
        "test.lbl": encode_labels(test_labels),
    }
    manifest = replace(manifest, source_checksum=_checksum(*payloads.values()))

    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    for filename, blob in payloads.items():
        (directory / filename).write_bytes(blob)
    (directory / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def load_dataset(path) -> EmbeddingDataset:
    """Load and fully validate a dataset directory."""
    directory = Path(path)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise ValidationError(f"missing file: {manifest_path}")
    manifest = DatasetManifest.from_json(manifest_path.read_text(encoding="utf-8"))
    manifest.validate()

    blobs = {}
    for filename in ("train.emb", "train.lbl", "test.emb", "test.lbl"):
        file_path = directory / filename
        if not file_path.is_file():
            raise ValidationError(f"missing file: {file_path}")
        blobs[filename] = file_path.read_bytes()

    actual = _checksum(*blobs.values())
    if actual != manifest.source_checksum:
        raise ValidationError(
            f"checksum mismatch in {directory}: payload {actual} "
            f"!= manifest source_checksum {manifest.source_checksum}"
        )

    train = decode_embeddings(blobs["train.emb"], "train.emb")
    test = decode_embeddings(blobs["test.emb"], "test.emb")
    train_labels = decode_labels(blobs["train.lbl"], "train.lbl")
    test_labels = decode_labels(blobs["test.lbl"], "test.lbl")

    if train.shape != (manifest.num_train, manifest.embedding_dim):
        raise ValidationError(
            f"train.emb shape {train.shape} does not match manifest "
            f"({manifest.num_train}, {manifest.embedding_dim})"
        )
    if test.shape != (manifest.num_test, manifest.embedding_dim):
        raise ValidationError(
            f"test.emb shape {test.shape} does not match manifest "
            f"({manifest.num_test}, {manifest.embedding_dim})"
        )
    if train_labels.shape[0] != manifest.num_train:
        raise ValidationError("train.lbl length does not match manifest num_train")
    if test_labels.shape[0] != manifest.num_test:
        raise ValidationError("test.lbl length does not match manifest num_test")
    if not np.isfinite(train).all():
        raise ValidationError("train.emb contains non-finite values")
    if not np.isfinite(test).all():
        raise ValidationError("test.emb contains non-finite values")
    for vec, name in ((train_labels, "train.lbl"), (test_labels, "test.lbl")):
        if vec.size and vec.max() >= manifest.num_classes:
            raise ValidationError(
                f"label out of range in {name}: values must lie in "
                f"[0, {manifest.num_classes})"
            )

    for arr in (train, test, train_labels, test_labels):
        arr.flags.writeable = False
    return EmbeddingDataset(
        manifest=manifest,
        train=train,
        train_labels=train_labels,
        test=test,
        test_labels=test_labels,
    )
