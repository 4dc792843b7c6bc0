"""Ranking metrics and experiment drivers.

AUC treats the abnormal class as positive: it is the probability that a
randomly drawn abnormal query scores above a randomly drawn normal one, with
ties counted half. The ROC sweep is an independent route to the same number
and the two are cross-checked in the tests.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, replace

import numpy as np

from .classifier import PipelineResult, run_pipeline
from .errors import ConfigurationError, UndefinedAucError
from .features import ExperimentSplit
from .mst import ThresholdConfig

__all__ = [
    "RocCurve",
    "EvalReport",
    "ClassEvaluation",
    "auc",
    "roc_curve",
    "confusion_counts",
    "evaluate_split",
    "sweep_gamma",
    "write_roc_csv",
]

VARIANT_SCORE = "score_based"
VARIANT_LABEL = "label_based"


def _check_scores_truth(scores, truth):
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    if scores.ndim != 1 or truth.shape != scores.shape:
        raise ConfigurationError("scores and truth must be 1-D and the same length")
    if scores.size == 0:
        raise UndefinedAucError("no samples to rank")
    if not set(np.unique(truth)) <= {0, 1}:
        raise ConfigurationError("truth must be 0 (normal) or 1 (abnormal)")
    if truth.min() == truth.max():
        raise UndefinedAucError("ground truth contains a single class")
    return scores, truth


def auc(scores, truth) -> float:
    """Rank-based two-sample statistic with midranks for ties."""
    scores, truth = _check_scores_truth(scores, truth)
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        # 1-based midrank shared by the tie group [i, j]
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    n1 = int(truth.sum())
    n0 = truth.size - n1
    rank_sum = float(ranks[truth == 1].sum())
    return (rank_sum - n1 * (n1 + 1) / 2.0) / (n0 * n1)


@dataclass(frozen=True)
class RocCurve:
    """Threshold sweep; points run from (0, 0) to (1, 1) as the threshold
    drops from +inf to the minimum score. Prediction rule at threshold T:
    abnormal when score >= T."""

    points: tuple[tuple[float, float, float], ...]  # (fpr, tpr, threshold)

    def area(self) -> float:
        total = 0.0
        for (f0, t0, _), (f1, t1, _) in zip(self.points, self.points[1:]):
            total += (f1 - f0) * (t0 + t1) / 2.0
        return total


def roc_curve(scores, truth) -> RocCurve:
    scores, truth = _check_scores_truth(scores, truth)
    n1 = int(truth.sum())
    n0 = truth.size - n1
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_truth = truth[order]

    points = [(0.0, 0.0, float("inf"))]
    tp = fp = 0
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        group = sorted_truth[i : j + 1]
        tp += int(group.sum())
        fp += group.size - int(group.sum())
        points.append((fp / n0, tp / n1, float(sorted_scores[i])))
        i = j + 1
    return RocCurve(points=tuple(points))


def confusion_counts(predicted, truth) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) with abnormal as the positive class."""
    predicted = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predicted.shape != truth.shape:
        raise ConfigurationError("prediction and truth lengths differ")
    tp = int(((predicted == 1) & (truth == 1)).sum())
    fp = int(((predicted == 1) & (truth == 0)).sum())
    tn = int(((predicted == 0) & (truth == 0)).sum())
    fn = int(((predicted == 0) & (truth == 1)).sum())
    return tp, fp, tn, fn


@dataclass
class EvalReport:
    """Headline numbers for one AUC variant across evaluated classes."""

    per_class_auc: dict[int, float]
    mean_auc: float
    auc_variant: str
    confusion: tuple[int, int, int, int]
    stage_counts: tuple[int, int, int]
    wall_time_seconds: float
    config_echo: dict


@dataclass
class ClassEvaluation:
    """Everything measured for one normal class."""

    normal_class: int
    pipeline: PipelineResult
    truth: np.ndarray
    auc_score_based: float
    auc_label_based: float
    roc_score_based: RocCurve
    confusion: tuple[int, int, int, int]
    wall_time_seconds: float


def evaluate_split(
    split: ExperimentSplit,
    config: ThresholdConfig,
    workers: int = 1,
    scan_all_edges: bool = False,
    trace: bool = False,
) -> ClassEvaluation:
    """Run the pipeline on one split and score it both ways."""
    if split.test.labels is None:
        raise ConfigurationError("evaluation requires a labeled test matrix")
    if split.test.rows == 0:
        raise ConfigurationError("no queries: test matrix is empty")
    truth = (split.test.labels != split.normal_class).astype(np.int64)

    started = time.perf_counter()
    result = run_pipeline(
        split.train_pool,
        split.test.values64(),
        config,
        workers=workers,
        scan_all_edges=scan_all_edges,
        trace=trace,
    )
    elapsed = time.perf_counter() - started

    scores = np.array([v.score for v in result.final], dtype=np.float64)
    labels = np.array([v.label for v in result.final], dtype=np.int64)
    return ClassEvaluation(
        normal_class=split.normal_class,
        pipeline=result,
        truth=truth,
        auc_score_based=auc(scores, truth),
        auc_label_based=auc(labels.astype(np.float64), truth),
        roc_score_based=roc_curve(scores, truth),
        confusion=confusion_counts(labels, truth),
        wall_time_seconds=elapsed,
    )


def sweep_gamma(
    split: ExperimentSplit,
    gammas,
    config: ThresholdConfig,
    workers: int = 1,
    scan_all_edges: bool = False,
) -> list[dict]:
    """One full pipeline run per neighborhood size, same thresholds."""
    gammas = [int(g) for g in gammas]
    if not gammas:
        raise ConfigurationError("gamma sweep needs at least one value")
    rows = []
    for g in gammas:
        ev = evaluate_split(
            split,
            replace(config, gamma=g),
            workers=workers,
            scan_all_edges=scan_all_edges,
        )
        s1n, s1a, unc = ev.pipeline.stage_counts
        rows.append(
            {
                "gamma": g,
                "normal_class": split.normal_class,
                "auc_score_based": ev.auc_score_based,
                "auc_label_based": ev.auc_label_based,
                "stage1_normal": s1n,
                "stage1_abnormal": s1a,
                "uncertain": unc,
                "wall_time_seconds": ev.wall_time_seconds,
            }
        )
    return rows


def write_roc_csv(path, curve: RocCurve) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["fpr", "tpr", "threshold"])
        for fpr, tpr, threshold in curve.points:
            writer.writerow([repr(fpr), repr(tpr), repr(threshold)])
