"""Command-line front end.

Five commands: evaluate, predict, sweep-gamma, roc, validate-features. All of
them validate parameters before touching any files, write their artifacts
under --output-dir with stable names, and exit nonzero with a one-line
message when anything is wrong. Outputs are deterministic byte for byte,
apart from the wall-clock timing fields inside report.json.
"""

from __future__ import annotations

import functools
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from .classifier import run_pipeline, write_verdicts_csv
from .errors import (
    ConfigurationError,
    FeatureDataError,
    FeatureFormatError,
    OcmstError,
)
from .evaluation import (
    ClassEvaluation,
    VARIANT_LABEL,
    VARIANT_SCORE,
    evaluate_split,
    sweep_gamma,
    write_roc_csv,
)
from .features import make_one_class_split, read_feature_file
from .mst import CLASS_NORMAL, ClassPool, ThresholdConfig

REPORT_SCHEMA = "ocmst-report-v1"
# Keys holding wall-clock measurements; everything else in the outputs is
# reproducible bit for bit across runs.
TIMING_KEYS = ("wall_time_seconds", "seconds_per_query")


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _handled(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FeatureFormatError as exc:
            where = "" if exc.byte_offset is None else f" (byte offset {exc.byte_offset})"
            _fail(f"{exc}{where}")
        except FeatureDataError as exc:
            _fail(str(exc))
        except OcmstError as exc:
            _fail(str(exc))
        except OSError as exc:
            _fail(str(exc))

    return wrapper


def _threshold_config(gamma: int, alpha0: float, alpha1: float) -> ThresholdConfig:
    # Raises ConfigurationError before any file is opened.
    return ThresholdConfig(gamma=gamma, alpha0=alpha0, alpha1=alpha1)


def _common_options(fn):
    options = [
        click.option("--gamma", type=int, default=8, show_default=True,
                     help="Neighborhood size for every tree build."),
        click.option("--alpha0", type=float, default=0.1, show_default=True,
                     help="Quantile fraction for the inner (acceptance) threshold."),
        click.option("--alpha1", type=float, default=0.8, show_default=True,
                     help="Quantile fraction for the outer (rejection) threshold."),
        click.option("--workers", type=int, default=os.cpu_count() or 1,
                     envvar="OCMST_WORKERS", show_default=True,
                     help="Parallel workers for stage mapping (env OCMST_WORKERS)."),
        click.option("--output-dir", type=click.Path(file_okay=False), default="ocmst-out",
                     show_default=True, help="Directory for result files."),
        click.option("--full-edge-scan", is_flag=True,
                     help="Ablation: measure against every tree edge, not just "
                          "the ones at the nearest node."),
        click.option("--trace", is_flag=True,
                     help="Dump each query's trees as line-delimited JSON."),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


def _load_labeled_pair(train_path: str, test_path: str):
    train = read_feature_file(train_path)
    test = read_feature_file(test_path)
    if test.rows == 0:
        raise ConfigurationError(f"no queries: test file {test_path} has zero rows")
    return train, test


def _write_trace(path: Path, records) -> None:
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True))
            fh.write("\n")


def _class_block(ev: ClassEvaluation, files: dict, composition) -> dict:
    s1n, s1a, unc = ev.pipeline.stage_counts
    tp, fp, tn, fn = ev.confusion
    queries = len(ev.pipeline.final)
    return {
        "auc": {VARIANT_SCORE: ev.auc_score_based, VARIANT_LABEL: ev.auc_label_based},
        "confusion": {"tp": tp, "fp": fp, "tn": tn, "fn": fn},
        "stage_counts": {"stage1_normal": s1n, "stage1_abnormal": s1a, "uncertain": unc},
        "abnormal_pool_size": ev.pipeline.abnormal_pool_size,
        "test_composition": None if composition is None else {
            "normal": composition[0], "abnormal": composition[1],
        },
        "queries": queries,
        "wall_time_seconds": ev.wall_time_seconds,
        "seconds_per_query": ev.wall_time_seconds / queries,
        "files": files,
    }


def _config_echo(command, gamma, alpha0, alpha1, workers, full_edge_scan, trace, **extra):
    echo = {
        "command": command,
        "gamma": gamma,
        "alpha0": alpha0,
        "alpha1": alpha1,
        "workers": workers,
        "full_edge_scan": full_edge_scan,
        "trace": trace,
    }
    echo.update(extra)
    return echo


def _write_report(outdir: Path, payload: dict) -> None:
    with open(outdir / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values)


@click.group()
def main():
    """Two-stage one-class novelty detection over per-query spanning trees."""


@main.command("evaluate")
@click.option("--train", "train_path", required=True, type=str,
              help="Labeled training feature file.")
@click.option("--test", "test_path", required=True, type=str,
              help="Labeled test feature file.")
@click.option("--normal-class", "normal_classes", type=int, multiple=True, required=True,
              help="Class id treated as normal; repeat for several runs.")
@_common_options
@_handled
def cmd_evaluate(train_path, test_path, normal_classes, gamma, alpha0, alpha1,
                 workers, output_dir, full_edge_scan, trace):
    """Run the full pipeline against labeled data and write an AUC report."""
    config = _threshold_config(gamma, alpha0, alpha1)
    train, test = _load_labeled_pair(train_path, test_path)

    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    classes = {}
    evaluations = []
    started = time.perf_counter()
    for k in normal_classes:
        split = make_one_class_split(train, test, k)
        ev = evaluate_split(split, config, workers=workers,
                            scan_all_edges=full_edge_scan, trace=trace)
        evaluations.append(ev)

        files = {
            "verdicts": f"verdicts_class{k}.csv",
            "roc": f"roc_class{k}.csv",
        }
        write_verdicts_csv(outdir / files["verdicts"], ev.pipeline.final)
        write_roc_csv(outdir / files["roc"], ev.roc_score_based)
        if trace:
            files["trace"] = f"trace_class{k}.jsonl"
            _write_trace(outdir / files["trace"], ev.pipeline.trace_records)
        classes[str(k)] = _class_block(ev, files, split.expected_test_composition)
        s1n, s1a, unc = ev.pipeline.stage_counts
        click.echo(
            f"class {k}: auc[score]={ev.auc_score_based:.4f} "
            f"auc[label]={ev.auc_label_based:.4f} "
            f"stage1 normal/abnormal/uncertain={s1n}/{s1a}/{unc} "
            f"{ev.wall_time_seconds:.2f}s "
            f"({1000.0 * ev.wall_time_seconds / len(ev.pipeline.final):.2f} ms/query)"
        )
    total_seconds = time.perf_counter() - started

    _write_auc_table(outdir / "auc_table.csv", evaluations)
    payload = {
        "schema": REPORT_SCHEMA,
        "config": _config_echo("evaluate", gamma, alpha0, alpha1, workers,
                               full_edge_scan, trace, train=train_path, test=test_path,
                               normal_classes=sorted(int(k) for k in normal_classes)),
        "classes": classes,
        "mean_auc": {
            VARIANT_SCORE: _mean(e.auc_score_based for e in evaluations),
            VARIANT_LABEL: _mean(e.auc_label_based for e in evaluations),
        },
        "wall_time_seconds": total_seconds,
    }
    _write_report(outdir, payload)
    click.echo(
        f"mean auc[score]={payload['mean_auc'][VARIANT_SCORE]:.4f} "
        f"auc[label]={payload['mean_auc'][VARIANT_LABEL]:.4f}; report: {outdir / 'report.json'}"
    )


def _write_auc_table(path: Path, evaluations) -> None:
    # One row per AUC variant, classes in ascending order, mean last.
    ordered = sorted(evaluations, key=lambda e: e.normal_class)
    header = ["variant"] + [f"class_{e.normal_class}" for e in ordered] + ["mean"]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for variant, pick in (
            (VARIANT_SCORE, lambda e: e.auc_score_based),
            (VARIANT_LABEL, lambda e: e.auc_label_based),
        ):
            values = [pick(e) for e in ordered]
            row = [variant] + [repr(v) for v in values] + [repr(_mean(values))]
            fh.write(",".join(row) + "\n")


@main.command("predict")
@click.option("--train", "train_path", required=True, type=str,
              help="Training feature file (labeled or a bare normal pool).")
@click.option("--test", "test_path", required=True, type=str,
              help="Query feature file; labels, if any, are ignored.")
@click.option("--normal-class", "normal_class", type=int, default=None,
              help="Class id for the normal pool when the training file is labeled.")
@_common_options
@_handled
def cmd_predict(train_path, test_path, normal_class, gamma, alpha0, alpha1,
                workers, output_dir, full_edge_scan, trace):
    """Label queries without consuming any ground truth."""
    config = _threshold_config(gamma, alpha0, alpha1)
    train = read_feature_file(train_path)
    test = read_feature_file(test_path)
    if test.rows == 0:
        raise ConfigurationError(f"no queries: test file {test_path} has zero rows")

    if train.labels is None:
        pool = ClassPool(train.values, CLASS_NORMAL)
    elif normal_class is None:
        available = sorted(int(c) for c in np.unique(train.labels))
        raise ConfigurationError(
            f"training file is labeled; pass --normal-class (available: {available})"
        )
    else:
        pool = make_one_class_split(train, test, normal_class).train_pool

    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    result = run_pipeline(pool, test.values64(), config, workers=workers,
                          scan_all_edges=full_edge_scan, trace=trace)
    write_verdicts_csv(outdir / "verdicts.csv", result.final)
    if trace:
        _write_trace(outdir / "trace.jsonl", result.trace_records)
    normal = sum(1 for v in result.final if v.label == 0)
    click.echo(
        f"{len(result.final)} queries: {normal} normal, {len(result.final) - normal} abnormal; "
        f"verdicts: {outdir / 'verdicts.csv'}"
    )


@main.command("sweep-gamma")
@click.option("--train", "train_path", required=True, type=str)
@click.option("--test", "test_path", required=True, type=str)
@click.option("--normal-class", "normal_classes", type=int, multiple=True, required=True)
@click.option("--gammas", "gammas_text", required=True, type=str,
              help="Comma-separated neighborhood sizes, e.g. 40,30,20,15,12,8,5.")
@_common_options
@_handled
def cmd_sweep_gamma(train_path, test_path, normal_classes, gammas_text, gamma,
                    alpha0, alpha1, workers, output_dir, full_edge_scan, trace):
    """Evaluate a list of neighborhood sizes; one pipeline run per value."""
    config = _threshold_config(gamma, alpha0, alpha1)
    try:
        gammas = [int(part) for part in gammas_text.split(",") if part.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse --gammas {gammas_text!r}") from None
    if not gammas:
        raise ConfigurationError("--gammas is empty")
    if any(g < 1 for g in gammas):
        raise ConfigurationError("every gamma must be >= 1")

    train, test = _load_labeled_pair(train_path, test_path)
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    all_rows = []
    for k in normal_classes:
        split = make_one_class_split(train, test, k)
        all_rows.extend(
            sweep_gamma(split, gammas, config, workers=workers,
                        scan_all_edges=full_edge_scan)
        )

    class_order = sorted(int(k) for k in normal_classes)
    by_cell = {(r["gamma"], r["normal_class"]): r for r in all_rows}
    with open(outdir / "sweep.csv", "w", newline="") as fh:
        header = ["gamma"] + [f"class_{k}" for k in class_order] + ["mean"]
        fh.write(",".join(header) + "\n")
        for g in gammas:
            values = [by_cell[(g, k)]["auc_score_based"] for k in class_order]
            fh.write(",".join([str(g)] + [repr(v) for v in values] + [repr(_mean(values))]) + "\n")
            click.echo(f"gamma={g}: mean auc[score]={_mean(values):.4f}")

    payload = {
        "schema": REPORT_SCHEMA,
        "config": _config_echo("sweep-gamma", gamma, alpha0, alpha1, workers,
                               full_edge_scan, trace, train=train_path, test=test_path,
                               normal_classes=class_order, gammas=gammas),
        "rows": all_rows,
    }
    with open(outdir / "sweep.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_report(outdir, payload)
    click.echo(f"sweep written to {outdir / 'sweep.csv'}")


@main.command("roc")
@click.option("--train", "train_path", required=True, type=str)
@click.option("--test", "test_path", required=True, type=str)
@click.option("--normal-class", "normal_classes", type=int, multiple=True, required=True)
@_common_options
@_handled
def cmd_roc(train_path, test_path, normal_classes, gamma, alpha0, alpha1,
            workers, output_dir, full_edge_scan, trace):
    """Write ROC point tables for the continuous pipeline score."""
    config = _threshold_config(gamma, alpha0, alpha1)
    train, test = _load_labeled_pair(train_path, test_path)
    outdir = Path(output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    auc_by_class = {}
    for k in normal_classes:
        split = make_one_class_split(train, test, k)
        ev = evaluate_split(split, config, workers=workers, scan_all_edges=full_edge_scan)
        write_roc_csv(outdir / f"roc_class{k}.csv", ev.roc_score_based)
        auc_by_class[str(k)] = ev.auc_score_based
        click.echo(f"class {k}: auc[score]={ev.auc_score_based:.4f} "
                   f"({len(ev.roc_score_based.points)} roc points)")

    payload = {
        "schema": REPORT_SCHEMA,
        "config": _config_echo("roc", gamma, alpha0, alpha1, workers,
                               full_edge_scan, trace, train=train_path, test=test_path,
                               normal_classes=sorted(int(k) for k in normal_classes)),
        "auc": {VARIANT_SCORE: auc_by_class},
    }
    _write_report(outdir, payload)


@main.command("validate-features")
@click.argument("path", type=str)
@_handled
def cmd_validate_features(path):
    """Parse a feature file and report its shape, or fail with the reason."""
    matrix = read_feature_file(path)
    click.echo(f"{path}: ok")
    click.echo(f"rows: {matrix.rows}")
    click.echo(f"dim: {matrix.dim}")
    if matrix.labels is None:
        click.echo("labels: absent")
    else:
        unique, counts = np.unique(matrix.labels, return_counts=True)
        summary = ", ".join(f"{int(u)}:{int(c)}" for u, c in zip(unique, counts))
        click.echo(f"labels: {summary}")
    if matrix.rows:
        click.echo(f"id range: {int(matrix.ids.min())}..{int(matrix.ids.max())}")


if __name__ == "__main__":
    main()
