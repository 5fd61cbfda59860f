"""Shared in-memory fixtures and brute-force oracles for strategy tests."""

import numpy as np

from alforge.dataset import DatasetManifest, EmbeddingDataset
from alforge.ips import PoolState
from alforge.query import QueryContext, StrategyParams
from alforge.util import derive_rng


def make_dataset(train, train_labels, num_classes, name="mem") -> EmbeddingDataset:
    train = np.asarray(train, dtype=np.float32)
    labels = np.asarray(train_labels, dtype=np.int64)
    manifest = DatasetManifest(
        dataset_name=name,
        model_name="none",
        pooling="CLS",
        num_train=train.shape[0],
        num_test=1,
        num_classes=num_classes,
        embedding_dim=train.shape[1],
        budget=train.shape[0],
    )
    return EmbeddingDataset(
        manifest=manifest,
        train=train,
        train_labels=labels,
        test=train[:1],
        test_labels=labels[:1],
    )


def make_ctx(
    dataset,
    labeled,
    probe,
    batch_size,
    rng=None,
    params=StrategyParams(),
) -> QueryContext:
    pool = PoolState.initial(dataset.manifest.num_train, labeled)
    return QueryContext(
        dataset=dataset,
        pool=pool,
        probe=probe,
        batch_size=batch_size,
        rng=rng if rng is not None else derive_rng(0),
        params=params,
    )


def probcover_oracle(points, delta, labeled, b):
    """Literal greedy max-coverage: recount everything each step."""
    n = len(points)
    dist = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(-1))
    ball = dist <= delta
    covered = np.zeros(n, dtype=bool)
    for index in labeled:
        covered |= ball[index]
    labeled_set = set(int(i) for i in labeled)
    picks = []
    for _ in range(b):
        best, best_count = None, -1
        for i in range(n):
            if i in labeled_set or i in picks:
                continue
            count = int((ball[i] & ~covered).sum())
            if count > best_count:
                best, best_count = i, count
        picks.append(best)
        covered |= ball[best]
    return picks
