"""Batched inference into one feature file plus a JSON metadata sidecar."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader, Subset

from .errors import ExtractionError
from .model import FEATURE_DIM
from .ocmf import write_ocmf


@dataclass(frozen=True)
class ExtractionJob:
    """One extraction request: which images, and where the features go."""

    dataset: str
    split: str
    output: str
    batch_size: int = 64
    limit: int | None = None


def extract_features(model, dataset, output, *, batch_size: int = 64,
                     limit: int | None = None, sidecar: dict | None = None) -> int:
    """Run ``model`` over ``dataset`` in order and write the results.

    Rows keep dataset order, ids are the dataset indices, and labels are the
    dataset targets.  A ``<output>.json`` sidecar records the metadata passed
    in ``sidecar`` plus the row count and width.  Returns the row count.
    """
    if batch_size < 1:
        raise ExtractionError(f"batch size must be >= 1, got {batch_size}")
    total = len(dataset)
    if limit is not None:
        if limit < 1:
            raise ExtractionError(f"limit must be >= 1, got {limit}")
        total = min(total, limit)
    if total == 0:
        raise ExtractionError("dataset is empty, nothing to extract")

    loader = DataLoader(
        Subset(dataset, range(total)),
        batch_size=batch_size,
        shuffle=False,
        num_workers=0,
    )

    values = np.empty((total, FEATURE_DIM), dtype=np.float32)
    labels = np.empty(total, dtype=np.int64)
    row = 0
    with torch.no_grad():
        for images, targets in loader:
            out = model(images)
            if out.ndim != 2 or out.shape[1] != FEATURE_DIM:
                raise ExtractionError(
                    f"backbone emitted shape {tuple(out.shape)}, "
                    f"need (batch, {FEATURE_DIM})"
                )
            count = out.shape[0]
            values[row:row + count] = out.cpu().numpy()
            labels[row:row + count] = np.asarray(targets, dtype=np.int64)
            row += count
    if row != total:
        raise ExtractionError(f"expected {total} rows, model produced {row}")

    output = Path(output)
    if str(output.parent):
        output.parent.mkdir(parents=True, exist_ok=True)
    write_ocmf(output, values, labels=labels, ids=np.arange(total, dtype=np.int64))

    meta = dict(sidecar or {})
    meta["rows"] = int(total)
    meta["dim"] = FEATURE_DIM
    with open(f"{output}.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return total
