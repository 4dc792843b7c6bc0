import struct

import numpy as np
import pytest

from ocmst import (
    ConfigurationError,
    FeatureDataError,
    FeatureFormatError,
    FeatureMatrix,
    make_one_class_split,
    read_feature_file,
    write_feature_file,
)


def random_matrix(rows=7, dim=5, labeled=True, seed=2):
    rng = np.random.default_rng(seed)
    return FeatureMatrix(
        values=rng.normal(0, 3, size=(rows, dim)).astype(np.float32),
        labels=rng.integers(0, 4, size=rows) if labeled else None,
        ids=rng.integers(0, 10_000, size=rows),
    )


def test_binary_round_trip_bit_exact(tmp_path):
    matrix = random_matrix()
    path = tmp_path / "feats.ocmf"
    write_feature_file(path, matrix)
    back = read_feature_file(path)
    assert back.values.dtype == np.float32
    assert np.array_equal(back.values, matrix.values)
    assert np.array_equal(back.labels, matrix.labels)
    assert np.array_equal(back.ids, matrix.ids)
    # Writing the same matrix twice produces identical bytes.
    path2 = tmp_path / "again.ocmf"
    write_feature_file(path2, matrix)
    assert path.read_bytes() == path2.read_bytes()


def test_binary_unlabeled_round_trip(tmp_path):
    matrix = random_matrix(labeled=False)
    path = tmp_path / "feats.ocmf"
    write_feature_file(path, matrix)
    back = read_feature_file(path)
    assert back.labels is None
    assert np.array_equal(back.values, matrix.values)


def test_zero_row_round_trip(tmp_path):
    matrix = FeatureMatrix(values=np.empty((0, 3), dtype=np.float32),
                           labels=np.empty(0, dtype=np.int64))
    path = tmp_path / "empty.ocmf"
    write_feature_file(path, matrix)
    back = read_feature_file(path)
    assert back.rows == 0 and back.dim == 3


def test_csv_round_trip_bit_exact(tmp_path):
    matrix = random_matrix(rows=9, dim=4)
    path = tmp_path / "feats.csv"
    write_feature_file(path, matrix)
    header = path.read_text().splitlines()[0]
    assert header == "id,label,f0,f1,f2,f3"
    back = read_feature_file(path)
    assert np.array_equal(back.values, matrix.values)
    assert np.array_equal(back.labels, matrix.labels)
    assert np.array_equal(back.ids, matrix.ids)


def test_csv_without_label_column(tmp_path):
    path = tmp_path / "queries.csv"
    path.write_text("id,f0,f1\n0,1.5,2.5\n1,-3.0,0.25\n")
    back = read_feature_file(path)
    assert back.labels is None
    assert back.rows == 2 and back.dim == 2
    assert back.values[1, 0] == np.float32(-3.0)


def test_missing_file_names_path(tmp_path):
    missing = tmp_path / "nope.ocmf"
    with pytest.raises(FeatureFormatError, match="nope.ocmf"):
        read_feature_file(missing)


def test_bad_magic_offset_zero(tmp_path):
    path = tmp_path / "feats.ocmf"
    write_feature_file(path, random_matrix())
    data = bytearray(path.read_bytes())
    data[0:4] = b"JUNK"
    path.write_bytes(bytes(data))
    # Without the magic the file is treated as CSV, which it is not either.
    with pytest.raises(FeatureFormatError) as err:
        read_feature_file(path)
    assert err.value.byte_offset is not None


def test_bad_version_offset_four(tmp_path):
    path = tmp_path / "feats.ocmf"
    write_feature_file(path, random_matrix())
    data = bytearray(path.read_bytes())
    struct.pack_into("<H", data, 4, 9)
    path.write_bytes(bytes(data))
    with pytest.raises(FeatureFormatError) as err:
        read_feature_file(path)
    assert err.value.byte_offset == 4


def test_bad_label_flag_offset(tmp_path):
    path = tmp_path / "feats.ocmf"
    write_feature_file(path, random_matrix())
    data = bytearray(path.read_bytes())
    data[14] = 7
    path.write_bytes(bytes(data))
    with pytest.raises(FeatureFormatError) as err:
        read_feature_file(path)
    assert err.value.byte_offset == 14


def test_truncated_file_reports_end_offset(tmp_path):
    path = tmp_path / "feats.ocmf"
    write_feature_file(path, random_matrix())
    data = path.read_bytes()[:-5]
    path.write_bytes(data)
    with pytest.raises(FeatureFormatError) as err:
        read_feature_file(path)
    assert err.value.byte_offset == len(data)


def test_trailing_bytes_report_expected_end(tmp_path):
    path = tmp_path / "feats.ocmf"
    write_feature_file(path, random_matrix())
    clean_size = len(path.read_bytes())
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(FeatureFormatError) as err:
        read_feature_file(path)
    assert err.value.byte_offset == clean_size


def test_nan_value_reports_row(tmp_path):
    matrix = random_matrix(rows=4, dim=2, labeled=False)
    path = tmp_path / "feats.ocmf"
    write_feature_file(path, matrix)
    data = bytearray(path.read_bytes())
    # Poison the first float of row 2 with a quiet NaN.
    offset = 15 + 2 * 2 * 4
    struct.pack_into("<f", data, offset, float("nan"))
    path.write_bytes(bytes(data))
    with pytest.raises(FeatureDataError) as err:
        read_feature_file(path)
    assert err.value.row == 2


def test_csv_bad_header(tmp_path):
    path = tmp_path / "feats.csv"
    path.write_text("sample,f0,f1\n0,1.0,2.0\n")
    with pytest.raises(FeatureFormatError) as err:
        read_feature_file(path)
    assert err.value.byte_offset == 0


def test_csv_nan_reports_row(tmp_path):
    path = tmp_path / "feats.csv"
    path.write_text("id,f0\n0,1.0\n1,nan\n")
    with pytest.raises(FeatureDataError) as err:
        read_feature_file(path)
    assert err.value.row == 1


def test_csv_bad_float_reports_row(tmp_path):
    path = tmp_path / "feats.csv"
    path.write_text("id,f0\n0,1.0\n1,wat\n")
    with pytest.raises(FeatureDataError) as err:
        read_feature_file(path)
    assert err.value.row == 1


def test_matrix_validation():
    with pytest.raises(FeatureDataError) as err:
        FeatureMatrix(values=np.array([[1.0], [np.inf]], dtype=np.float32))
    assert err.value.row == 1
    with pytest.raises(ConfigurationError):
        FeatureMatrix(values=np.zeros((2, 2), dtype=np.float32),
                      labels=np.zeros(3, dtype=np.int64))
    with pytest.raises(ConfigurationError):
        FeatureMatrix(values=np.zeros((2, 0), dtype=np.float32))


def test_labels_must_fit_sixteen_bits(tmp_path):
    matrix = FeatureMatrix(values=np.zeros((1, 1), dtype=np.float32),
                           labels=np.array([70_000]))
    with pytest.raises(ConfigurationError):
        write_feature_file(tmp_path / "bad.ocmf", matrix)


def test_one_class_split_toy_example():
    train = FeatureMatrix(values=np.arange(6, dtype=np.float32).reshape(3, 2),
                          labels=np.array([0, 0, 1]))
    test = FeatureMatrix(values=np.arange(8, dtype=np.float32).reshape(4, 2),
                         labels=np.array([0, 1, 1, 1]))
    split = make_one_class_split(train, test, 0)
    assert len(split.train_pool) == 2
    assert split.train_pool.class_tag == "normal"
    assert split.expected_test_composition == (1, 3)
    assert np.array_equal(split.train_pool.features, train.values[:2].astype(float))


def test_one_class_split_absent_class_lists_options():
    train = FeatureMatrix(values=np.zeros((3, 2), dtype=np.float32),
                          labels=np.array([0, 0, 1]))
    test = FeatureMatrix(values=np.zeros((2, 2), dtype=np.float32))
    with pytest.raises(ConfigurationError, match=r"\[0, 1\]"):
        make_one_class_split(train, test, 9)


def test_one_class_split_requires_train_labels():
    train = FeatureMatrix(values=np.zeros((3, 2), dtype=np.float32))
    test = FeatureMatrix(values=np.zeros((2, 2), dtype=np.float32))
    with pytest.raises(ConfigurationError):
        make_one_class_split(train, test, 0)


def test_one_class_split_unlabeled_test_has_no_composition():
    train = FeatureMatrix(values=np.zeros((2, 2), dtype=np.float32),
                          labels=np.array([3, 3]))
    test = FeatureMatrix(values=np.ones((2, 2), dtype=np.float32))
    split = make_one_class_split(train, test, 3)
    assert split.expected_test_composition is None


def test_one_class_split_dimension_mismatch():
    train = FeatureMatrix(values=np.zeros((2, 2), dtype=np.float32),
                          labels=np.array([0, 0]))
    test = FeatureMatrix(values=np.zeros((2, 3), dtype=np.float32))
    with pytest.raises(ConfigurationError):
        make_one_class_split(train, test, 0)
