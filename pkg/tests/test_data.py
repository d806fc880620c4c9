import numpy as np
import pytest

from subsel.data import (
    FeatureDataset,
    make_rng,
    partition_by_label,
    validate_dataset,
)
from subsel.errors import InvalidDataset, MissingLabels


def test_partition_groups_by_label():
    ds = FeatureDataset(np.zeros((3, 1)), [0, 0, 1])
    assert partition_by_label(ds).classes == ((0, 1), (2,))


def test_partition_interleaved():
    ds = FeatureDataset(np.zeros((4, 1)), [1, 0, 1, 0])
    assert partition_by_label(ds).classes == ((1, 3), (0, 2))


def test_partition_empty_declared_class():
    ds = FeatureDataset(np.zeros((3, 1)), [0, 0, 0], n_classes=2)
    with pytest.raises(MissingLabels, match=r"\[1\]"):
        partition_by_label(ds)
    assert any("class 1" in line for line in validate_dataset(ds))


def test_partition_without_labels():
    with pytest.raises(MissingLabels):
        partition_by_label(FeatureDataset(np.zeros((2, 2))))


def test_partition_covers_ground_set():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 40))
        C = int(rng.integers(1, 5))
        labels = np.concatenate([np.arange(C), rng.integers(0, C, n)])
        rng.shuffle(labels)
        ds = FeatureDataset(np.zeros((labels.size, 1)), labels)
        part = partition_by_label(ds)
        flat = sorted(i for cls in part.classes for i in cls)
        assert flat == list(range(labels.size))
        assert all(list(c) == sorted(c) for c in part.classes)


def test_validate_clean():
    ds = FeatureDataset(np.arange(6.0).reshape(3, 2), [0, 1, 0], ["a", "b", "c"])
    assert validate_dataset(ds) == []


def test_validate_nan_names_row_and_column():
    X = np.ones((3, 2))
    X[1, 0] = np.nan
    report = validate_dataset(FeatureDataset(X))
    assert len(report) == 1
    assert "row 1" in report[0] and "column 0" in report[0]


def test_validate_duplicate_id():
    ds = FeatureDataset(np.ones((3, 2)), ids=["img_7", "img_8", "img_7"])
    report = validate_dataset(ds)
    assert len(report) == 1 and "img_7" in report[0]


def test_dataset_is_immutable():
    ds = FeatureDataset(np.ones((2, 2)))
    with pytest.raises(ValueError):
        ds.features[0, 0] = 5.0


def test_bad_shapes_rejected():
    with pytest.raises(InvalidDataset):
        FeatureDataset(np.ones(3))
    with pytest.raises(InvalidDataset):
        FeatureDataset(np.ones((3, 2)), labels=[0, 1])


def test_rng_streams_are_reproducible_and_distinct():
    a = make_rng(7, 1).random(5)
    assert np.array_equal(a, make_rng(7, 1).random(5))
    assert not np.array_equal(a, make_rng(7, 2).random(5))
    assert not np.array_equal(a, make_rng(8, 1).random(5))
    make_rng(2**64 - 1)
    with pytest.raises(ValueError):
        make_rng(-1)
