"""Two-stage decision procedure over per-query spanning trees.

Stage 1 measures every query against a small tree grown from its nearest
normal training rows and labels it normal, abnormal, or uncertain using two
quantile thresholds on the tree's own edge weights. Queries rejected outright
seed an abnormal pool. Stage 2 then settles each uncertain query by building
one tree per class: if exactly one tree accepts the query it wins, otherwise a
spread-weighted distance score (zeta) breaks the tie. Every query receives
exactly one final verdict; nothing is dropped.
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ClassUnavailableError, ConfigurationError, PoolExhaustedError
from .geometry import euclidean_distance, segment_distance
from .mst import (
    CLASS_ABNORMAL,
    CLASS_NORMAL,
    ORIGIN_STAGE1_PREDICTED,
    ClassPool,
    MinSpanTree,
    ThresholdConfig,
    build_small_mst,
    select_gamma_nearest,
)

__all__ = [
    "LABEL_NORMAL",
    "LABEL_ABNORMAL",
    "LABEL_UNCERTAIN",
    "DECIDED_STAGE1",
    "DECIDED_STAGE2_EXCLUSIVE",
    "DECIDED_STAGE2_ZETA",
    "DECIDED_STAGE2_FALLBACK",
    "StageOneVerdict",
    "ZetaInputs",
    "FinalVerdict",
    "PipelineResult",
    "zeta_score",
    "stage_one_distance",
    "stage_one_classify",
    "build_abnormal_pool",
    "zeta_for_class",
    "stage_two_resolve",
    "run_pipeline",
    "write_verdicts_csv",
    "VERDICT_CSV_HEADER",
]

LABEL_NORMAL = 0
LABEL_ABNORMAL = 1
LABEL_UNCERTAIN = "w"

DECIDED_STAGE1 = "stage1"
DECIDED_STAGE2_EXCLUSIVE = "stage2_exclusive"
DECIDED_STAGE2_ZETA = "stage2_zeta"
DECIDED_STAGE2_FALLBACK = "stage2_fallback"


@dataclass(frozen=True)
class StageOneVerdict:
    """First-pass label for one query with the evidence that produced it."""

    query_id: int
    label: int | str
    distance: float
    theta0_used: float
    theta1_used: float

    def branch_consistent(self) -> bool:
        """True when the label agrees with the recorded distance and thresholds."""
        if self.label == LABEL_NORMAL:
            return self.distance <= self.theta0_used
        if self.label == LABEL_ABNORMAL:
            return self.distance >= self.theta1_used
        return self.theta0_used < self.distance < self.theta1_used


@dataclass(frozen=True)
class ZetaInputs:
    """Ingredients of one per-class tiebreak score.

    d is the tree distance, spread the sample standard deviation of the
    query's distances to its neighbor_count nearest rows of the class, and
    zeta = d * (spread + 1).
    """

    d: float
    neighbor_count: int
    spread: float
    zeta: float


@dataclass(frozen=True)
class FinalVerdict:
    query_id: int
    label: int
    decided_at: str
    score: float
    stage1_label: int | str
    d0: float
    d1: float | None = None
    zeta0: float | None = None
    zeta1: float | None = None


@dataclass
class PipelineResult:
    """Everything one pipeline run produced, in query order."""

    final: list[FinalVerdict]
    stage_one: list[StageOneVerdict]
    abnormal_pool_size: int
    stage1_seconds: float
    stage2_seconds: float
    trace_records: list[dict] | None = None

    @property
    def stage_counts(self) -> tuple[int, int, int]:
        """(stage-1 normal, stage-1 abnormal, uncertain) tallies."""
        normal = sum(1 for v in self.stage_one if v.label == LABEL_NORMAL)
        abnormal = sum(1 for v in self.stage_one if v.label == LABEL_ABNORMAL)
        return normal, abnormal, len(self.stage_one) - normal - abnormal

    @property
    def wall_time_seconds(self) -> float:
        return self.stage1_seconds + self.stage2_seconds


def zeta_score(d: float, spread: float) -> float:
    """Distance inflated by the local spread of the neighborhood."""
    return d * (spread + 1.0)


def stage_one_distance(
    x, mst: MinSpanTree, pool: ClassPool, scan_all_edges: bool = False
) -> float:
    """Distance from x to the tree, measured on edges touching its nearest node.

    The nearest tree node is found first (ties go to the lower pool row
    index); only edges incident to that node are measured unless
    scan_all_edges widens the search for ablation runs. An edgeless tree
    falls back to the plain distance to its single node.
    """
    if not mst.node_indices:
        raise PoolExhaustedError("spanning tree has no nodes")
    x = np.asarray(x, dtype=np.float64)
    rows = pool.features
    node_rows = rows[list(mst.node_indices)]
    diffs = node_rows - x
    dists = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    best = dists.min()
    nodex = min(
        mst.node_indices[k] for k in np.flatnonzero(dists == best)
    )

    if scan_all_edges:
        edges = mst.edges
    else:
        edges = [e for e in mst.edges if nodex in (e[0], e[1])]
    if not edges:
        return float(best)
    return min(
        segment_distance(x, rows[i], rows[j]).distance for i, j, _ in edges
    )


def stage_one_classify(
    x,
    normal_pool: ClassPool,
    config: ThresholdConfig,
    query_id: int = 0,
    scan_all_edges: bool = False,
) -> StageOneVerdict:
    """Select neighbors, grow the tree, measure, and apply the two thresholds."""
    verdict, _ = _stage_one(x, normal_pool, config, query_id, scan_all_edges, trace=False)
    return verdict


def _three_way_label(d: float, theta0: float, theta1: float):
    if d <= theta0:
        return LABEL_NORMAL
    if d >= theta1:
        return LABEL_ABNORMAL
    return LABEL_UNCERTAIN


def _trace_record(query_id: int, stage: int, class_tag: str, mst: MinSpanTree) -> dict:
    return {
        "query_id": query_id,
        "stage": stage,
        "class": class_tag,
        "nodes": list(mst.node_indices),
        "edges": [[i, j, w] for i, j, w in mst.edges],
        "theta0": mst.theta0,
        "theta1": mst.theta1,
    }


def _stage_one(x, normal_pool, config, query_id, scan_all_edges, trace):
    if normal_pool.class_tag != CLASS_NORMAL:
        raise ConfigurationError("stage 1 requires the normal training pool")
    idx = select_gamma_nearest(x, normal_pool, config.gamma)
    mst = build_small_mst(idx, normal_pool, config)
    d = stage_one_distance(x, mst, normal_pool, scan_all_edges)
    verdict = StageOneVerdict(
        query_id=query_id,
        label=_three_way_label(d, mst.theta0, mst.theta1),
        distance=d,
        theta0_used=mst.theta0,
        theta1_used=mst.theta1,
    )
    records = [_trace_record(query_id, 1, CLASS_NORMAL, mst)] if trace else None
    return verdict, records


def build_abnormal_pool(verdicts, test_features) -> ClassPool:
    """Pool of the test rows stage 1 rejected outright. May be empty."""
    feats = np.asarray(test_features, dtype=np.float64)
    if feats.ndim != 2:
        raise ConfigurationError("test features must be a 2-D matrix")
    if len(verdicts) != feats.shape[0]:
        raise ConfigurationError(
            f"{len(verdicts)} verdicts do not cover {feats.shape[0]} test rows"
        )
    rows = [v.query_id for v in verdicts if v.label == LABEL_ABNORMAL]
    if len(set(rows)) != len(rows) or any(not (0 <= r < feats.shape[0]) for r in rows):
        raise ConfigurationError("verdict query ids must be unique test row indices")
    selected = feats[rows] if rows else np.empty((0, feats.shape[1]))
    return ClassPool(selected, CLASS_ABNORMAL, ORIGIN_STAGE1_PREDICTED)


def zeta_for_class(
    x, pool: ClassPool, config: ThresholdConfig, scan_all_edges: bool = False
) -> ZetaInputs:
    """Tree distance and neighborhood spread for one class.

    The spread is the sample standard deviation (N - 1 divisor) of the
    query's distances to its min(gamma, pool size) nearest rows; fewer than
    two neighbors leave it at zero.
    """
    _, zin = _class_profile(x, pool, config, scan_all_edges)
    return zin


def _class_profile(x, pool, config, scan_all_edges):
    if len(pool) == 0:
        raise ClassUnavailableError(f"no {pool.class_tag} rows available")
    x = np.asarray(x, dtype=np.float64)
    idx = select_gamma_nearest(x, pool, config.gamma)
    mst = build_small_mst(idx, pool, config)
    d = stage_one_distance(x, mst, pool, scan_all_edges)
    diffs = pool.features[idx] - x
    neighbor_d = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    n = len(idx)
    spread = float(np.std(neighbor_d, ddof=1)) if n >= 2 else 0.0
    return mst, ZetaInputs(d=d, neighbor_count=n, spread=spread, zeta=zeta_score(d, spread))


def _band_score(zeta_delta: float, theta0: float, theta1: float, label: int) -> float:
    # Squash zeta0 - zeta1 into the uncertainty band, normals below the
    # midpoint and abnormals above it, so scores never contradict labels.
    u = zeta_delta / (1.0 + abs(zeta_delta))
    half = 0.5 * (theta1 - theta0)
    base = theta0 if label == LABEL_NORMAL else theta0 + half
    return base + half * (u + 1.0) / 2.0


def stage_two_resolve(
    x,
    normal_pool: ClassPool,
    abnormal_pool: ClassPool,
    config: ThresholdConfig,
    query_id: int = 0,
    scan_all_edges: bool = False,
) -> FinalVerdict:
    """Settle one query stage 1 left uncertain."""
    verdict, _ = _stage_two(
        x, normal_pool, abnormal_pool, config, query_id, scan_all_edges, trace=False
    )
    return verdict


def _stage_two(x, normal_pool, abnormal_pool, config, query_id, scan_all_edges, trace):
    mst0, z0 = _class_profile(x, normal_pool, config, scan_all_edges)
    records = [_trace_record(query_id, 2, CLASS_NORMAL, mst0)] if trace else None

    if len(abnormal_pool) == 0:
        # Nothing was strongly rejected, so there is no abnormal evidence to
        # race against; accept anything inside the outer boundary.
        label = LABEL_NORMAL if z0.d <= mst0.theta1 else LABEL_ABNORMAL
        verdict = FinalVerdict(
            query_id=query_id,
            label=label,
            decided_at=DECIDED_STAGE2_FALLBACK,
            score=z0.d,
            stage1_label=LABEL_UNCERTAIN,
            d0=z0.d,
        )
        return verdict, records

    mst1, z1 = _class_profile(x, abnormal_pool, config, scan_all_edges)
    if trace:
        records.append(_trace_record(query_id, 2, CLASS_ABNORMAL, mst1))

    accept0 = z0.d <= mst0.theta1
    accept1 = z1.d <= mst1.theta1
    if accept0 != accept1:
        label = LABEL_NORMAL if accept0 else LABEL_ABNORMAL
        decided_at = DECIDED_STAGE2_EXCLUSIVE
    else:
        label = LABEL_NORMAL if z0.zeta <= z1.zeta else LABEL_ABNORMAL
        decided_at = DECIDED_STAGE2_ZETA

    verdict = FinalVerdict(
        query_id=query_id,
        label=label,
        decided_at=decided_at,
        score=_band_score(z0.zeta - z1.zeta, mst0.theta0, mst0.theta1, label),
        stage1_label=LABEL_UNCERTAIN,
        d0=z0.d,
        d1=z1.d,
        zeta0=z0.zeta,
        zeta1=z1.zeta,
    )
    return verdict, records


def _ordered_map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_pipeline(
    train_normal: ClassPool,
    test_features,
    config: ThresholdConfig,
    workers: int = 1,
    scan_all_edges: bool = False,
    trace: bool = False,
) -> PipelineResult:
    """Run both stages over a test matrix.

    Stage 1 is mapped over all rows (threads share the read-only pools), then
    the abnormal pool is assembled at a barrier and stage 2 resolves the
    uncertain rows. Results come back in query order regardless of worker
    count.
    """
    if train_normal.class_tag != CLASS_NORMAL:
        raise ConfigurationError("training pool must carry the normal class")
    feats = np.ascontiguousarray(np.asarray(test_features, dtype=np.float64))
    if feats.ndim != 2:
        raise ConfigurationError(f"test features must be 2-D, got shape {feats.shape}")
    if feats.shape[1] != train_normal.dim:
        raise ConfigurationError(
            f"test dimension {feats.shape[1]} does not match training dimension {train_normal.dim}"
        )
    if not np.isfinite(feats).all():
        raise ConfigurationError("test features must be finite")
    workers = max(1, int(workers))

    t0 = time.perf_counter()
    stage_one_out = _ordered_map(
        lambda i: _stage_one(feats[i], train_normal, config, i, scan_all_edges, trace),
        range(feats.shape[0]),
        workers,
    )
    stage1_seconds = time.perf_counter() - t0

    stage_one = [v for v, _ in stage_one_out]
    abnormal_pool = build_abnormal_pool(stage_one, feats)
    uncertain_ids = [v.query_id for v in stage_one if v.label == LABEL_UNCERTAIN]

    t1 = time.perf_counter()
    stage_two_out = _ordered_map(
        lambda i: _stage_two(
            feats[i], train_normal, abnormal_pool, config, i, scan_all_edges, trace
        ),
        uncertain_ids,
        workers,
    )
    stage2_seconds = time.perf_counter() - t1

    resolved = {v.query_id: v for v, _ in stage_two_out}
    final: list[FinalVerdict] = []
    for v in stage_one:
        if v.label == LABEL_UNCERTAIN:
            final.append(resolved[v.query_id])
        else:
            final.append(
                FinalVerdict(
                    query_id=v.query_id,
                    label=v.label,
                    decided_at=DECIDED_STAGE1,
                    score=v.distance,
                    stage1_label=v.label,
                    d0=v.distance,
                )
            )

    trace_records = None
    if trace:
        trace_records = []
        for _, recs in stage_one_out:
            trace_records.extend(recs)
        for _, recs in stage_two_out:
            trace_records.extend(recs)

    return PipelineResult(
        final=final,
        stage_one=stage_one,
        abnormal_pool_size=len(abnormal_pool),
        stage1_seconds=stage1_seconds,
        stage2_seconds=stage2_seconds,
        trace_records=trace_records,
    )


VERDICT_CSV_HEADER = [
    "query_id",
    "stage1_label",
    "final_label",
    "d0",
    "d1",
    "zeta0",
    "zeta1",
    "decided_at",
    "score",
]


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def write_verdicts_csv(path, verdicts) -> None:
    """One row per query; float fields use shortest round-trip formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(VERDICT_CSV_HEADER)
        for v in verdicts:
            writer.writerow(
                [
                    v.query_id,
                    v.stage1_label,
                    v.label,
                    _fmt(v.d0),
                    _fmt(v.d1),
                    _fmt(v.zeta0),
                    _fmt(v.zeta1),
                    v.decided_at,
                    _fmt(v.score),
                ]
            )
