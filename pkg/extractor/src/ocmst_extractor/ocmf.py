"""Writer for the shared feature interchange format.

Layout, all little-endian: magic ``OCMF``, format version (u16), row count
(u32), feature dimension (u32), label flag (u8); then the row-major float32
matrix, one int16 label per row when the flag is set, and one int64 id per
row.  Nothing here depends on the detector package; the two sides only have
to agree on these bytes.
"""

from __future__ import annotations

import numpy as np

import struct

from .errors import ExtractionError

MAGIC = b"OCMF"
VERSION = 1
HEADER = struct.Struct("<4sHIIB")


def write_ocmf(path, values, labels=None, ids=None) -> None:
    """Write one feature matrix, refusing anything the format cannot hold."""
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2 or values.shape[1] < 1:
        raise ExtractionError(
            f"feature matrix must be 2-D with at least one column, got shape {values.shape}"
        )
    if not np.isfinite(values).all():
        raise ExtractionError("feature matrix contains non-finite entries")
    rows, dim = values.shape

    if ids is None:
        id_arr = np.arange(rows, dtype="<i8")
    else:
        id_arr = np.ascontiguousarray(ids, dtype="<i8")
        if id_arr.shape != (rows,):
            raise ExtractionError(
                f"need one id per row, got {id_arr.shape} for {rows} rows"
            )

    flag = 0
    label_bytes = b""
    if labels is not None:
        label_arr = np.asarray(labels)
        if label_arr.shape != (rows,):
            raise ExtractionError(
                f"need one label per row, got {label_arr.shape} for {rows} rows"
            )
        if rows and (label_arr.min() < -32768 or label_arr.max() > 32767):
            raise ExtractionError("labels must fit a 16-bit signed integer")
        flag = 1
        label_bytes = np.ascontiguousarray(label_arr, dtype="<i2").tobytes()

    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, rows, dim, flag))
        fh.write(values.tobytes())
        fh.write(label_bytes)
        fh.write(id_arr.tobytes())
