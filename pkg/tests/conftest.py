import numpy as np
import pytest

from ocmst import ClassPool, FeatureMatrix, write_feature_file


def make_two_blob_case(n_train=200, n_normal=500, n_outlier=500, dim=8,
                       separation=20.0, seed=7):
    """Unit Gaussian training blob plus a test set that is half inliers and
    half points from a blob `separation` standard deviations away."""
    rng = np.random.default_rng(seed)
    train = rng.normal(0.0, 1.0, size=(n_train, dim))
    test_normal = rng.normal(0.0, 1.0, size=(n_normal, dim))
    offset = np.zeros(dim)
    offset[0] = separation
    test_outlier = rng.normal(0.0, 1.0, size=(n_outlier, dim)) + offset
    test = np.vstack([test_normal, test_outlier])
    truth = np.array([0] * n_normal + [1] * n_outlier, dtype=np.int64)
    return train, test, truth


@pytest.fixture
def blob_case():
    return make_two_blob_case()


@pytest.fixture
def blob_pool(blob_case):
    train, _, _ = blob_case
    return ClassPool(train, "normal")


def write_blob_fixture_files(directory, fmt="ocmf", n_train=80, n_normal=60,
                             n_outlier=60, dim=6, seed=11):
    """Write a small labeled train/test pair for CLI tests; returns paths."""
    train, test, truth = make_two_blob_case(
        n_train=n_train, n_normal=n_normal, n_outlier=n_outlier, dim=dim, seed=seed
    )
    suffix = ".csv" if fmt == "csv" else ".ocmf"
    train_path = directory / f"train{suffix}"
    test_path = directory / f"test{suffix}"
    write_feature_file(
        train_path,
        FeatureMatrix(values=train.astype(np.float32),
                      labels=np.zeros(len(train), dtype=np.int64)),
        fmt=fmt,
    )
    write_feature_file(
        test_path,
        FeatureMatrix(values=test.astype(np.float32), labels=truth),
        fmt=fmt,
    )
    return train_path, test_path
