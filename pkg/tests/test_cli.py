"""End-to-end tests for the command-line interface.

Everything runs through click's CliRunner against real files in tmp_path.
The reproducibility tests compare artifacts byte for byte, which is the
contract the tools promise (report.json only after dropping its wall-clock
timing fields).
"""

import json

import numpy as np
from click.testing import CliRunner

from conftest import write_blob_fixture_files
from ocmst import FeatureMatrix, write_feature_file
from ocmst.cli import TIMING_KEYS, main

EXPECTED_QUERIES = 120  # write_blob_fixture_files default: 60 normal + 60 outlier


def run_cli(args, env=None):
    runner = CliRunner()
    return runner.invoke(main, [str(a) for a in args], env=env,
                         catch_exceptions=False)


def stderr_of(result):
    try:
        return result.stderr
    except ValueError:
        return result.output


def strip_timing(obj):
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def evaluate_args(train, test, outdir, *extra):
    return ["evaluate", "--train", train, "--test", test,
            "--normal-class", "0", "--output-dir", outdir, *extra]


def test_evaluate_happy_path(tmp_path):
    train, test = write_blob_fixture_files(tmp_path)
    out = tmp_path / "out"
    result = run_cli(evaluate_args(train, test, out))
    assert result.exit_code == 0

    report = json.loads((out / "report.json").read_text())
    assert report["schema"] == "ocmst-report-v1"
    assert report["config"]["gamma"] == 8
    assert report["config"]["normal_classes"] == [0]
    block = report["classes"]["0"]
    # Hard labels lose a few tail normals to the strict default acceptance
    # band, so only the ranking variant is expected to saturate.
    assert block["auc"]["score_based"] >= 0.99
    assert block["auc"]["label_based"] >= 0.8
    assert block["queries"] == EXPECTED_QUERIES
    assert block["test_composition"] == {"normal": 60, "abnormal": 60}
    counts = block["stage_counts"]
    assert sum(counts.values()) == EXPECTED_QUERIES
    assert block["wall_time_seconds"] > 0

    verdict_lines = (out / "verdicts_class0.csv").read_text().splitlines()
    assert verdict_lines[0].startswith("query_id,stage1_label,final_label")
    assert len(verdict_lines) == EXPECTED_QUERIES + 1

    roc_lines = (out / "roc_class0.csv").read_text().splitlines()
    assert roc_lines[0] == "fpr,tpr,threshold"
    assert len(roc_lines) > 2

    table = (out / "auc_table.csv").read_text().splitlines()
    assert table[0] == "variant,class_0,mean"
    assert table[1].startswith("score_based,")
    assert table[2].startswith("label_based,")

    assert "class 0:" in result.output
    assert "mean auc" in result.output


def test_evaluate_artifacts_reproducible(tmp_path):
    train, test = write_blob_fixture_files(tmp_path)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        result = run_cli(evaluate_args(train, test, out, "--workers", "2"))
        assert result.exit_code == 0

    for name in ("verdicts_class0.csv", "roc_class0.csv", "auc_table.csv"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    report_a = json.loads((out_a / "report.json").read_text())
    report_b = json.loads((out_b / "report.json").read_text())
    assert strip_timing(report_a) == strip_timing(report_b)


def test_worker_count_does_not_change_results(tmp_path):
    train, test = write_blob_fixture_files(tmp_path)
    out_serial, out_parallel = tmp_path / "serial", tmp_path / "parallel"
    run_cli(evaluate_args(train, test, out_serial, "--workers", "1"))
    run_cli(evaluate_args(train, test, out_parallel, "--workers", "4"))
    assert (out_serial / "verdicts_class0.csv").read_bytes() == \
        (out_parallel / "verdicts_class0.csv").read_bytes()


def test_alpha_order_checked_before_any_file_io(tmp_path):
    missing = tmp_path / "definitely-not-here.ocmf"
    result = run_cli(evaluate_args(missing, missing, tmp_path / "out",
                                   "--alpha0", "0.9", "--alpha1", "0.2"))
    assert result.exit_code == 2
    err = stderr_of(result)
    assert "alpha0" in err
    # Validation must fire before the loader ever sees the bogus path.
    assert "definitely-not-here" not in err


def test_gamma_zero_rejected(tmp_path):
    missing = tmp_path / "nope.ocmf"
    result = run_cli(evaluate_args(missing, missing, tmp_path / "out", "--gamma", "0"))
    assert result.exit_code == 2
    assert "gamma" in stderr_of(result)


def test_missing_test_file_names_the_path(tmp_path):
    train, _ = write_blob_fixture_files(tmp_path)
    ghost = tmp_path / "ghost.ocmf"
    result = run_cli(evaluate_args(train, ghost, tmp_path / "out"))
    assert result.exit_code == 2
    assert "ghost.ocmf" in stderr_of(result)


def test_empty_test_file_rejected(tmp_path):
    train, _ = write_blob_fixture_files(tmp_path)
    empty = tmp_path / "empty.ocmf"
    write_feature_file(empty, FeatureMatrix(values=np.zeros((0, 6), dtype=np.float32)))
    result = run_cli(evaluate_args(train, empty, tmp_path / "out"))
    assert result.exit_code == 2
    assert "no queries" in stderr_of(result)


def test_predict_with_unlabeled_pool(tmp_path):
    rng = np.random.default_rng(3)
    train = FeatureMatrix(values=rng.normal(size=(60, 5)).astype(np.float32))
    queries = np.vstack([rng.normal(size=(10, 5)),
                         rng.normal(size=(10, 5)) + 25.0]).astype(np.float32)
    test = FeatureMatrix(values=queries)
    train_path, test_path = tmp_path / "pool.ocmf", tmp_path / "queries.ocmf"
    write_feature_file(train_path, train)
    write_feature_file(test_path, test)

    out = tmp_path / "out"
    result = run_cli(["predict", "--train", train_path, "--test", test_path,
                      "--output-dir", out])
    assert result.exit_code == 0
    assert "20 queries" in result.output
    lines = (out / "verdicts.csv").read_text().splitlines()
    assert len(lines) == 21

    # Every far query must come back abnormal; the near ones are allowed a
    # few tail rejections under the strict default acceptance band.
    labels = [line.split(",")[2] for line in lines[1:]]
    assert labels[10:] == ["1"] * 10
    assert labels[:10].count("0") >= 6

    out2 = tmp_path / "out2"
    run_cli(["predict", "--train", train_path, "--test", test_path,
             "--output-dir", out2])
    assert (out / "verdicts.csv").read_bytes() == (out2 / "verdicts.csv").read_bytes()


def test_predict_labeled_train_requires_class_choice(tmp_path):
    train, test = write_blob_fixture_files(tmp_path)
    result = run_cli(["predict", "--train", train, "--test", test,
                      "--output-dir", tmp_path / "out"])
    assert result.exit_code == 2
    err = stderr_of(result)
    assert "--normal-class" in err
    assert "[0]" in err

    picked = run_cli(["predict", "--train", train, "--test", test,
                      "--normal-class", "0", "--output-dir", tmp_path / "out"])
    assert picked.exit_code == 0
    assert (tmp_path / "out" / "verdicts.csv").exists()


def test_trace_output_parses(tmp_path):
    train, test = write_blob_fixture_files(tmp_path)
    out = tmp_path / "out"
    result = run_cli(evaluate_args(train, test, out, "--trace"))
    assert result.exit_code == 0

    trace_path = out / "trace_class0.jsonl"
    records = [json.loads(line) for line in trace_path.read_text().splitlines()]
    assert records
    required = {"query_id", "stage", "class", "nodes", "edges", "theta0", "theta1"}
    for record in records:
        assert required <= set(record)
        assert record["stage"] in (1, 2)

    stage1_ids = {r["query_id"] for r in records if r["stage"] == 1}
    assert stage1_ids == set(range(EXPECTED_QUERIES))

    report = json.loads((out / "report.json").read_text())
    assert report["classes"]["0"]["files"]["trace"] == "trace_class0.jsonl"


def test_sweep_gamma_outputs(tmp_path):
    train, test = write_blob_fixture_files(tmp_path)
    out = tmp_path / "out"
    result = run_cli(["sweep-gamma", "--train", train, "--test", test,
                      "--normal-class", "0", "--gammas", "3,5",
                      "--output-dir", out])
    assert result.exit_code == 0

    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[0] == "gamma,class_0,mean"
    assert [line.split(",")[0] for line in lines[1:]] == ["3", "5"]

    payload = json.loads((out / "sweep.json").read_text())
    assert payload["config"]["gammas"] == [3, 5]
    assert len(payload["rows"]) == 2
    for row in payload["rows"]:
        assert row["auc_score_based"] >= 0.9
    assert json.loads((out / "report.json").read_text()) == payload


def test_sweep_gamma_rejects_bad_lists(tmp_path):
    train, test = write_blob_fixture_files(tmp_path)
    base = ["sweep-gamma", "--train", train, "--test", test,
            "--normal-class", "0", "--output-dir", tmp_path / "out"]
    for gammas, fragment in (("3,x", "cannot parse"),
                             ("", "empty"),
                             ("0,3", ">= 1")):
        result = run_cli(base + ["--gammas", gammas])
        assert result.exit_code == 2
        assert fragment in stderr_of(result)


def test_roc_command(tmp_path):
    train, test = write_blob_fixture_files(tmp_path)
    out = tmp_path / "out"
    result = run_cli(["roc", "--train", train, "--test", test,
                      "--normal-class", "0", "--output-dir", out])
    assert result.exit_code == 0
    assert (out / "roc_class0.csv").exists()
    report = json.loads((out / "report.json").read_text())
    assert report["auc"]["score_based"]["0"] >= 0.99


def test_validate_features_reports_shape(tmp_path):
    train, _ = write_blob_fixture_files(tmp_path)
    result = run_cli(["validate-features", train])
    assert result.exit_code == 0
    assert "rows: 80" in result.output
    assert "dim: 6" in result.output
    assert "labels: 0:80" in result.output


def test_validate_features_rejects_truncated_file(tmp_path):
    train, _ = write_blob_fixture_files(tmp_path)
    clean = train.read_bytes()
    broken = tmp_path / "broken.ocmf"
    broken.write_bytes(clean[: len(clean) - 5])
    result = run_cli(["validate-features", broken])
    assert result.exit_code == 2
    assert "byte offset" in stderr_of(result)


def test_full_edge_scan_flag(tmp_path):
    train, test = write_blob_fixture_files(tmp_path)
    out = tmp_path / "out"
    result = run_cli(evaluate_args(train, test, out, "--full-edge-scan"))
    assert result.exit_code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["full_edge_scan"] is True
    assert report["classes"]["0"]["auc"]["score_based"] >= 0.99


def test_workers_env_variable(tmp_path):
    train, test = write_blob_fixture_files(tmp_path)
    out = tmp_path / "out"
    result = run_cli(evaluate_args(train, test, out), env={"OCMST_WORKERS": "3"})
    assert result.exit_code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["workers"] == 3
