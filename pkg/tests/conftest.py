import numpy as np
import pytest

from alforge.dataset import DatasetManifest, write_dataset


def make_blob_arrays(
    num_classes: int,
    per_class_train: int,
    per_class_test: int,
    dim: int,
    center_scale: float,
    seed: int,
):
    """Gaussian class blobs with unit noise around scaled random centers."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(num_classes, dim)) * center_scale
    train = np.vstack(
        [c + rng.normal(size=(per_class_train, dim)) for c in centers]
    ).astype(np.float32)
    train_labels = np.repeat(np.arange(num_classes), per_class_train)
    test = np.vstack(
        [c + rng.normal(size=(per_class_test, dim)) for c in centers]
    ).astype(np.float32)
    test_labels = np.repeat(np.arange(num_classes), per_class_test)
    return train, train_labels, test, test_labels


def write_blob_dataset(
    path,
    name: str,
    num_classes: int,
    per_class_train: int,
    per_class_test: int,
    dim: int,
    center_scale: float,
    budget: int,
    seed: int,
) -> str:
    train, train_labels, test, test_labels = make_blob_arrays(
        num_classes, per_class_train, per_class_test, dim, center_scale, seed
    )
    manifest = DatasetManifest(
        dataset_name=name,
        model_name="synthetic",
        pooling="MEAN",
        num_train=train.shape[0],
        num_test=test.shape[0],
        num_classes=num_classes,
        embedding_dim=dim,
        budget=budget,
    )
    write_dataset(manifest, train, train_labels, test, test_labels, path)
    return str(path)


@pytest.fixture(scope="session")
def blob4_dir(tmp_path_factory):
    """Separable 4-class blobs: N=2000, D=16, budget 200."""
    path = tmp_path_factory.mktemp("blob4") / "data"
    return write_blob_dataset(
        path, "blob4", num_classes=4, per_class_train=500, per_class_test=150,
        dim=16, center_scale=1.2, budget=200, seed=7,
    )


@pytest.fixture(scope="session")
def blob8_dir(tmp_path_factory):
    """Well-separated 8-class blobs: N=2000, D=16, budget 168."""
    path = tmp_path_factory.mktemp("blob8") / "data"
    return write_blob_dataset(
        path, "blob8", num_classes=8, per_class_train=250, per_class_test=50,
        dim=16, center_scale=2.0, budget=168, seed=11,
    )


@pytest.fixture()
def tiny_dataset_dir(tmp_path):
    """Small 3-class dataset for format and CLI tests."""
    path = tmp_path / "tiny"
    return write_blob_dataset(
        path, "tiny", num_classes=3, per_class_train=30, per_class_test=10,
        dim=4, center_scale=3.0, budget=30, seed=3,
    )
