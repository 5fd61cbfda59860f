"""Batch extraction of frozen text embeddings.

A corpus is either a local directory holding ``<split>.jsonl`` files (one
JSON object per line with text and integer label fields) or a dataset id on
the public hub.  The encoder is any transformers checkpoint, given as a hub
id or a local path.  Hidden states are pooled per the model's convention:

    CLS   hidden state of the first token
    EOS   hidden state of the last non-padding token
    MEAN  attention-mask-weighted mean over tokens

Inference runs on CPU in eval mode with gradients disabled, so repeated
extraction of the same spec against the same weights produces byte-identical
dataset directories (equal source_checksum).
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .models import documented_pooling
from .store import write_dataset_dir

POOLING_MODES = ("CLS", "EOS", "MEAN")


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExtractionSpec:
    data_source: str
    model: str
    pooling: str
    output_dir: str
    dataset_name: str = ""
    model_name: str = ""
    train_split: str = "train"
    test_split: str = "test"
    max_length: int = 256
    batch_size: int = 32
    row_cap: int | None = None
    budget: int | None = None
    add_special_tokens: bool = True
    text_field: str = "text"
    label_field: str = "label"

    def validate(self) -> None:
        if self.pooling not in POOLING_MODES:
            raise ExtractionError(
                f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}"
            )
        convention = documented_pooling(self.model)
        if convention is not None and convention != self.pooling:
            raise ExtractionError(
                f"model {self.model!r} uses {convention} pooling by convention, "
                f"got {self.pooling}"
            )
        if self.max_length < 1 or self.batch_size < 1:
            raise ExtractionError("max_length and batch_size must be positive")
        if self.row_cap is not None and self.row_cap < 1:
            raise ExtractionError("row_cap must be positive when given")


def _load_jsonl(path: Path, text_field: str, label_field: str):
    texts, labels = [], []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if text_field not in record or label_field not in record:
                raise ExtractionError(
                    f"{path}:{line_no} lacks {text_field!r}/{label_field!r}"
                )
            texts.append(str(record[text_field]))
            labels.append(int(record[label_field]))
    return texts, labels


def load_split(spec: ExtractionSpec, split: str):
    """Texts and labels for one split, from a local dir or the hub."""
    source = Path(spec.data_source)
    if source.is_dir():
        path = source / f"{split}.jsonl"
        if not path.is_file():
            raise ExtractionError(f"missing split file: {path}")
        return _load_jsonl(path, spec.text_field, spec.label_field)
    try:
        import datasets
    except ImportError as exc:
        raise ExtractionError(
            "hub corpora need the 'datasets' package; pass a local directory "
            "of <split>.jsonl files instead"
        ) from exc
    try:
        data = datasets.load_dataset(spec.data_source, split=split)
    except Exception as exc:
        raise ExtractionError(
            f"failed to download {spec.data_source!r} split {split!r}: {exc}"
        ) from exc
    return (
        [str(t) for t in data[spec.text_field]],
        [int(v) for v in data[spec.label_field]],
    )


def stratified_cap(labels, cap: int):
    """Indices of a per-class proportional head-sample of size min(cap, n).

    Class quotas use largest-remainder rounding; within a class the earliest
    rows win, so the subset is deterministic.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if cap >= n:
        return np.arange(n)
    classes, counts = np.unique(labels, return_counts=True)
    exact = counts * (cap / n)
    quotas = np.floor(exact).astype(int)
    remainder = cap - quotas.sum()
    by_frac = np.argsort(-(exact - quotas), kind="stable")
    for position in by_frac[:remainder]:
        quotas[position] += 1
    keep = []
    for cls, quota in zip(classes, quotas):
        keep.extend(np.flatnonzero(labels == cls)[:quota])
    return np.sort(np.asarray(keep, dtype=np.int64))


def _load_encoder(model_id: str):
    import torch
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(model_id)
        model = AutoModel.from_pretrained(model_id)
    except Exception as exc:
        raise ExtractionError(f"failed to load encoder {model_id!r}: {exc}") from exc
    model.eval()
    torch.set_grad_enabled(False)
    return tokenizer, model


def embed_texts(texts, tokenizer, model, spec: ExtractionSpec):
    """Pooled embeddings (float32) and the count of truncated texts."""
    import torch

    rows = []
    truncated = 0
    for start in range(0, len(texts), spec.batch_size):
        batch = texts[start : start + spec.batch_size]
        full_lengths = [
            len(ids)
            for ids in tokenizer(
                batch, add_special_tokens=spec.add_special_tokens, truncation=False
            )["input_ids"]
        ]
        truncated += sum(length > spec.max_length for length in full_lengths)

        encoded = tokenizer(
            batch,
            padding=True,
            truncation=True,
            max_length=spec.max_length,
            add_special_tokens=spec.add_special_tokens,
            return_tensors="pt",
        )
        hidden = model(**encoded).last_hidden_state
        mask = encoded["attention_mask"]
        if spec.pooling == "CLS":
            pooled = hidden[:, 0, :]
        elif spec.pooling == "EOS":
            last = mask.sum(dim=1) - 1
            pooled = hidden[torch.arange(hidden.shape[0]), last, :]
        else:
            weights = mask.unsqueeze(-1).to(hidden.dtype)
            pooled = (hidden * weights).sum(dim=1) / weights.sum(dim=1)
        rows.append(pooled.to(torch.float32).numpy())
    features = (
        np.concatenate(rows, axis=0)
        if rows
        else np.zeros((0, model.config.hidden_size), dtype=np.float32)
    )
    return features.astype(np.float32, copy=False), truncated


def extract(spec: ExtractionSpec) -> Path:
    """Run the full pipeline; returns the written dataset directory."""
    spec.validate()
    tokenizer, model = _load_encoder(spec.model)

    splits = {}
    truncation = {}
    for role, split in (("train", spec.train_split), ("test", spec.test_split)):
        texts, labels = load_split(spec, split)
        if not texts:
            raise ExtractionError(f"split {split!r} is empty")
        if spec.row_cap is not None:
            keep = stratified_cap(labels, spec.row_cap)
            texts = [texts[i] for i in keep]
            labels = [labels[i] for i in keep]
        features, truncated = embed_texts(texts, tokenizer, model, spec)
        splits[role] = (features, np.asarray(labels, dtype=np.int64))
        truncation[role] = truncated

    train, train_labels = splits["train"]
    test, test_labels = splits["test"]
    num_classes = int(max(train_labels.max(), test_labels.max())) + 1
    if num_classes < 2:
        raise ExtractionError("corpus must contain at least two classes")

    return write_dataset_dir(
        spec.output_dir,
        dataset_name=spec.dataset_name or Path(spec.data_source).name,
        model_name=spec.model_name or spec.model.rstrip("/").rsplit("/", 1)[-1],
        pooling=spec.pooling,
        budget=spec.budget if spec.budget is not None else train.shape[0],
        train=train,
        train_labels=train_labels,
        test=test,
        test_labels=test_labels,
        num_classes=num_classes,
        extras={
            "truncated_train": truncation["train"],
            "truncated_test": truncation["test"],
        },
    )
