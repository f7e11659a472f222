import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from nutmeg.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def simulate(runner, out, *extra):
    args = ["simulate", "--n-items", "40", "--n-annotators", "20",
            "--seed", "3", "--output-dir", str(out), *extra]
    result = runner.invoke(main, args)
    assert result.exit_code == 0, result.output
    return out


def test_simulate_writes_expected_files(runner, tmp_path):
    out = simulate(runner, tmp_path / "world")
    for name in ("annotations.csv", "annotators.csv", "truth_labels.csv",
                 "truth_spam.csv", "manifest.json"):
        assert (out / name).exists()
    lines = (out / "annotations.csv").read_text().strip().splitlines()
    assert lines[0] == "item_id,annotator_id,label"
    assert len(lines) == 1 + 40 * 5


def test_simulate_deterministic_across_runs(runner, tmp_path):
    a = simulate(runner, tmp_path / "a")
    b = simulate(runner, tmp_path / "b")
    assert (a / "annotations.csv").read_bytes() == \
        (b / "annotations.csv").read_bytes()
    assert (a / "truth_spam.csv").read_bytes() == \
        (b / "truth_spam.csv").read_bytes()


def test_aggregate_majority_on_toy_file(runner, tmp_path):
    ann = tmp_path / "ann.csv"
    ann.write_text("item_id,annotator_id,label\n"
                   "i0,a0,yes\ni0,a1,yes\ni0,a2,no\n"
                   "i1,a0,no\ni1,a1,no\n")
    out = tmp_path / "agg"
    result = runner.invoke(main, ["aggregate", str(ann), "--method",
                                  "majority", "--output-dir", str(out)])
    assert result.exit_code == 0, result.output
    rows = (out / "labels.csv").read_text().strip().splitlines()
    assert rows[0] == \
        "item_id,subpopulation,label,posterior_max,confidence,imputed"
    got = {r.split(",")[0]: r.split(",")[2] for r in rows[1:]}
    assert got == {"i0": "yes", "i1": "no"}
    assert not (out / "competence.csv").exists()


def test_aggregate_nutmeg_end_to_end(runner, tmp_path):
    world = simulate(runner, tmp_path / "world")
    out = tmp_path / "agg"
    result = runner.invoke(main, [
        "aggregate", str(world / "annotations.csv"),
        "--annotators-file", str(world / "annotators.csv"),
        "--method", "nutmeg", "--restarts", "2", "--output-dir", str(out)])
    assert result.exit_code == 0, result.output
    rows = (out / "labels.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 40 * 2  # one row per (item, subpopulation)
    assert (out / "competence.csv").exists()

    leave = tmp_path / "leave"
    result = runner.invoke(main, [
        "aggregate", str(world / "annotations.csv"),
        "--annotators-file", str(world / "annotators.csv"),
        "--method", "nutmeg", "--restarts", "2",
        "--imputation-mode", "leave_missing", "--output-dir", str(leave)])
    assert result.exit_code == 0, result.output
    kept = (leave / "labels.csv").read_text().strip().splitlines()
    assert len(kept) < len(rows)  # unobserved cells carry no row
    assert all(r.endswith(",false") for r in kept[1:])


def test_aggregate_nutmeg_requires_annotators_file(runner, tmp_path):
    world = simulate(runner, tmp_path / "world")
    result = runner.invoke(main, [
        "aggregate", str(world / "annotations.csv"),
        "--method", "nutmeg", "--output-dir", str(tmp_path / "x")])
    assert result.exit_code == 1


def test_aggregate_rerun_from_manifest_is_byte_identical(runner, tmp_path):
    world = simulate(runner, tmp_path / "world")
    out1 = tmp_path / "run1"
    args = ["aggregate", str(world / "annotations.csv"),
            "--annotators-file", str(world / "annotators.csv"),
            "--method", "nutmeg", "--restarts", "2",
            "--output-dir", str(out1)]
    assert runner.invoke(main, args).exit_code == 0
    out2 = tmp_path / "run2"
    result = runner.invoke(main, [
        "aggregate", str(world / "annotations.csv"),
        "--from-manifest", str(out1 / "manifest.json"),
        "--output-dir", str(out2)])
    assert result.exit_code == 0, result.output
    assert (out1 / "labels.csv").read_bytes() == \
        (out2 / "labels.csv").read_bytes()
    assert (out1 / "competence.csv").read_bytes() == \
        (out2 / "competence.csv").read_bytes()


def test_evaluate_perfect_labels(runner, tmp_path):
    world = simulate(runner, tmp_path / "world")
    truth = (world / "truth_labels.csv").read_text().strip().splitlines()
    labels = tmp_path / "labels.csv"
    lines = ["item_id,subpopulation,label,posterior_max,confidence,imputed"]
    for row in truth[1:]:
        item, group, label = row.split(",")
        lines.append(f"{item},{group},{label},1,1,false")
    labels.write_text("\n".join(lines) + "\n")
    out = tmp_path / "metrics.json"
    result = runner.invoke(main, [
        "evaluate", str(labels),
        "--truth-labels", str(world / "truth_labels.csv"),
        "--output", str(out)])
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text())
    assert report["accuracy_by_subpop"] == \
        {"majority": 1.0, "minority": 1.0}
    assert report["divisiveness_estimate"] == pytest.approx(0.2)


def test_evaluate_disjoint_items_fails_with_exit_1(runner, tmp_path):
    world = simulate(runner, tmp_path / "world")
    labels = tmp_path / "labels.csv"
    labels.write_text(
        "item_id,subpopulation,label,posterior_max,confidence,imputed\n"
        "zzz,majority,0,1,1,false\n")
    result = runner.invoke(main, [
        "evaluate", str(labels),
        "--truth-labels", str(world / "truth_labels.csv")])
    assert result.exit_code == 1


def test_bad_annotation_file_fails_with_exit_3(runner, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("wrong,header\n1,2\n")
    result = runner.invoke(main, [
        "aggregate", str(bad), "--method", "majority",
        "--output-dir", str(tmp_path / "x")])
    assert result.exit_code == 3


def test_sweep_and_report(runner, tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({
        "divisiveness_rate": [0.0, 0.5],
        "n_items": [30], "n_annotators": [15]}))
    out = tmp_path / "sweep"
    result = runner.invoke(main, [
        "sweep", str(grid), "--methods", "nutmeg,majority",
        "--replicates", "1", "--restarts", "2",
        "--output-dir", str(out)])
    assert result.exit_code == 0, result.output
    rows = (out / "results.csv").read_text().strip().splitlines()
    header = rows[0].split(",")
    assert {"divisiveness_rate", "method", "metric_name", "value",
            "status"} <= set(header)
    methods = {r.split(",")[header.index("method")] for r in rows[1:]}
    assert methods == {"nutmeg", "majority"}
    assert all(r.split(",")[header.index("status")] == "ok"
               for r in rows[1:])

    figs = tmp_path / "figs"
    result = runner.invoke(main, [
        "report", str(out / "results.csv"), "--output-dir", str(figs)])
    assert result.exit_code == 0, result.output
    pngs = list(Path(figs).glob("*.png"))
    assert pngs, "report produced no figures"


def test_sweep_unknown_method_fails(runner, tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text("{}")
    result = runner.invoke(main, [
        "sweep", str(grid), "--methods", "guesswork",
        "--output-dir", str(tmp_path / "x")])
    assert result.exit_code == 1
