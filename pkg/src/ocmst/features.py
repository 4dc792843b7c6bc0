"""Feature matrices on disk and one-class experiment splits.

Two interchange formats are supported.

Binary (extension-agnostic, detected by magic):
    offset 0   magic "OCMF" (4 bytes)
    offset 4   format version, u16 little-endian (currently 1)
    offset 6   row count, u32 little-endian
    offset 10  dimension, u32 little-endian
    offset 14  labels-present flag, u8 (0 or 1)
    offset 15  row-major float32 values, rows * dim, little-endian
    then       int16 labels, one per row, only when the flag is 1
    then       int64 ids, one per row
Nothing may follow the ids block.

CSV (for fixtures and docs): header "id,label,f0,...,f{d-1}", one sample per
data row. The label column may be omitted for unlabeled query sets.

Values are stored at float32 precision; all in-memory computation elsewhere
in the package is float64.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FeatureDataError, FeatureFormatError
from .mst import CLASS_NORMAL, ORIGIN_GROUND_TRUTH, ClassPool

__all__ = [
    "FeatureMatrix",
    "ExperimentSplit",
    "read_feature_file",
    "write_feature_file",
    "make_one_class_split",
]

_MAGIC = b"OCMF"
_VERSION = 1
_HEADER = struct.Struct("<4sHIIB")


@dataclass
class FeatureMatrix:
    """In-memory feature file: float32 values plus per-row ids and labels."""

    values: np.ndarray
    labels: np.ndarray | None = None
    ids: np.ndarray | None = None

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float32))
        if vals.ndim != 2:
            raise ConfigurationError(f"feature values must be 2-D, got shape {vals.shape}")
        if vals.shape[1] < 1:
            raise ConfigurationError("feature dimension must be at least 1")
        bad = ~np.isfinite(vals).all(axis=1)
        if bad.any():
            raise FeatureDataError(
                f"non-finite feature value at row {int(np.argmax(bad))}",
                row=int(np.argmax(bad)),
            )
        self.values = vals
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int64)
            if labels.shape != (vals.shape[0],):
                raise ConfigurationError(
                    f"labels shape {labels.shape} does not match {vals.shape[0]} rows"
                )
            self.labels = labels
        if self.ids is None:
            self.ids = np.arange(vals.shape[0], dtype=np.int64)
        else:
            ids = np.asarray(self.ids, dtype=np.int64)
            if ids.shape != (vals.shape[0],):
                raise ConfigurationError(
                    f"ids shape {ids.shape} does not match {vals.shape[0]} rows"
                )
            self.ids = ids

    @property
    def rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])

    def values64(self) -> np.ndarray:
        """Float64 copy for computation."""
        return np.asarray(self.values, dtype=np.float64)


def read_feature_file(path) -> FeatureMatrix:
    """Load a feature file, auto-detecting binary vs CSV by its first bytes."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise FeatureFormatError(f"feature file not found: {path}") from None
    if data[:4] == _MAGIC:
        return _parse_binary(data, path)
    return _parse_csv(data, path)


def _parse_binary(data: bytes, path: Path) -> FeatureMatrix:
    if len(data) < _HEADER.size:
        raise FeatureFormatError(
            f"{path}: truncated header, expected {_HEADER.size} bytes, got {len(data)}",
            byte_offset=len(data),
        )
    magic, version, rows, dim, flag = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {magic!r}", byte_offset=0)
    if version != _VERSION:
        raise FeatureFormatError(
            f"{path}: unsupported format version {version}", byte_offset=4
        )
    if dim < 1:
        raise FeatureFormatError(f"{path}: dimension field is {dim}", byte_offset=10)
    if flag not in (0, 1):
        raise FeatureFormatError(
            f"{path}: labels-present flag must be 0 or 1, got {flag}", byte_offset=14
        )

    offset = _HEADER.size
    values_bytes = rows * dim * 4
    labels_bytes = rows * 2 if flag else 0
    ids_bytes = rows * 8
    expected = offset + values_bytes + labels_bytes + ids_bytes
    if len(data) < expected:
        raise FeatureFormatError(
            f"{path}: file ends early, expected {expected} bytes, got {len(data)}",
            byte_offset=len(data),
        )
    if len(data) > expected:
        raise FeatureFormatError(
            f"{path}: {len(data) - expected} trailing bytes after ids block",
            byte_offset=expected,
        )

    values = np.frombuffer(data, dtype="<f4", count=rows * dim, offset=offset)
    values = values.reshape(rows, dim).copy()
    offset += values_bytes
    labels = None
    if flag:
        labels = np.frombuffer(data, dtype="<i2", count=rows, offset=offset).copy()
        offset += labels_bytes
    ids = np.frombuffer(data, dtype="<i8", count=rows, offset=offset).copy()

    finite = np.isfinite(values).all(axis=1)
    if not finite.all():
        row = int(np.argmin(finite))
        raise FeatureDataError(f"{path}: non-finite value at row {row}", row=row)
    return FeatureMatrix(values=values, labels=labels, ids=ids)


def _parse_csv(data: bytes, path: Path) -> FeatureMatrix:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FeatureFormatError(
            f"{path}: neither OCMF magic nor decodable CSV text", byte_offset=exc.start
        ) from None
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise FeatureFormatError(f"{path}: empty file", byte_offset=0) from None

    header = [h.strip() for h in header]
    has_labels = len(header) > 1 and header[1] == "label"
    feature_names = header[2:] if has_labels else header[1:]
    expected_names = [f"f{i}" for i in range(len(feature_names))]
    if header[:1] != ["id"] or not feature_names or feature_names != expected_names:
        raise FeatureFormatError(
            f"{path}: header must be id,[label,]f0..f{{d-1}}, got {','.join(header)}",
            byte_offset=0,
        )

    dim = len(feature_names)
    ids, labels, rows = [], [], []
    for row_idx, record in enumerate(reader):
        if len(record) != len(header):
            raise FeatureDataError(
                f"{path}: row {row_idx} has {len(record)} fields, expected {len(header)}",
                row=row_idx,
            )
        start = 2 if has_labels else 1
        try:
            ids.append(int(record[0]))
            if has_labels:
                labels.append(int(record[1]))
            feats = [float(v) for v in record[start:]]
        except ValueError as exc:
            raise FeatureDataError(f"{path}: row {row_idx}: {exc}", row=row_idx) from None
        if any(not math.isfinite(v) for v in feats):
            raise FeatureDataError(
                f"{path}: non-finite value at row {row_idx}", row=row_idx
            )
        rows.append(feats)

    values = np.asarray(rows, dtype=np.float32).reshape(len(rows), dim)
    return FeatureMatrix(
        values=values,
        labels=np.asarray(labels, dtype=np.int64) if has_labels else None,
        ids=np.asarray(ids, dtype=np.int64),
    )


def write_feature_file(path, matrix: FeatureMatrix, fmt: str | None = None) -> None:
    """Serialize a matrix; fmt defaults to CSV for .csv paths, binary otherwise."""
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "ocmf"
    if fmt == "ocmf":
        _write_binary(path, matrix)
    elif fmt == "csv":
        _write_csv(path, matrix)
    else:
        raise ConfigurationError(f"unknown feature file format {fmt!r}")


def _write_binary(path: Path, matrix: FeatureMatrix) -> None:
    if matrix.labels is not None:
        lab = matrix.labels
        if lab.size and (lab.min() < -(2**15) or lab.max() >= 2**15):
            raise ConfigurationError("labels do not fit in 16 bits")
    flag = 1 if matrix.labels is not None else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, matrix.rows, matrix.dim, flag))
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f4").tobytes())
        if flag:
            fh.write(np.ascontiguousarray(matrix.labels, dtype="<i2").tobytes())
        fh.write(np.ascontiguousarray(matrix.ids, dtype="<i8").tobytes())


def _write_csv(path: Path, matrix: FeatureMatrix) -> None:
    header = ["id"]
    if matrix.labels is not None:
        header.append("label")
    header.extend(f"f{i}" for i in range(matrix.dim))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in range(matrix.rows):
            record = [int(matrix.ids[r])]
            if matrix.labels is not None:
                record.append(int(matrix.labels[r]))
            # repr of the float64 promotion round-trips the float32 bits.
            record.extend(repr(float(v)) for v in matrix.values[r])
            writer.writerow(record)


@dataclass
class ExperimentSplit:
    """One-class protocol inputs: a normal-only training pool and the full
    labeled test partition. Test labels stay on this object for evaluation
    and are never handed to the classifier."""

    normal_class: int
    train_pool: ClassPool
    test: FeatureMatrix
    expected_test_composition: tuple[int, int] | None = None


def make_one_class_split(
    train: FeatureMatrix, test: FeatureMatrix, normal_class: int
) -> ExperimentSplit:
    """Restrict training rows to one class and pair them with the test set."""
    if train.labels is None:
        raise ConfigurationError("training matrix has no labels to split on")
    if train.dim != test.dim:
        raise ConfigurationError(
            f"train dimension {train.dim} does not match test dimension {test.dim}"
        )
    mask = train.labels == normal_class
    if not mask.any():
        available = sorted(int(c) for c in np.unique(train.labels))
        raise ConfigurationError(
            f"class {normal_class} absent from training labels; available: {available}"
        )
    pool = ClassPool(train.values[mask], CLASS_NORMAL, ORIGIN_GROUND_TRUTH)
    composition = None
    if test.labels is not None:
        normal_count = int((test.labels == normal_class).sum())
        composition = (normal_count, test.rows - normal_count)
    return ExperimentSplit(
        normal_class=int(normal_class),
        train_pool=pool,
        test=test,
        expected_test_composition=composition,
    )
