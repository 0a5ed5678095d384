import json
import time
from pathlib import Path

import pytest
from click.testing import CliRunner

from realabel.cli import main
from realabel.datamodel import ingest_labels

from conftest import build_pipeline_fixture, write_fixture_files

DATA = Path(__file__).parent / "data"


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, args, **kwargs):
    result = runner.invoke(main, args, catch_exceptions=False, **kwargs)
    return result


SUBCOMMANDS = [
    "propose", "select-models", "make-tasks", "serve", "simulate-raters",
    "aggregate", "curve", "metrics", "compare", "oracle", "cooccur",
    "curves", "audit", "folds", "clean", "loss-check",
]


def test_help_on_every_subcommand(runner):
    for sub in SUBCOMMANDS:
        result = invoke(runner, [sub, "--help"])
        assert result.exit_code == 0, sub
    for sub in ("audit make", "audit aggregate"):
        result = invoke(runner, sub.split() + ["--help"])
        assert result.exit_code == 0, sub


def test_missing_input_file_is_module_error_naming_path(runner):
    result = runner.invoke(
        main, ["metrics", "--pred", "nope.csv", "--labels", "x.jsonl"]
    )
    assert result.exit_code == 1
    err = json.loads(result.output.strip().splitlines()[-1])
    assert "nope.csv" in err["error"]["message"]


def test_unknown_flag_is_usage_error(runner):
    result = runner.invoke(main, ["metrics", "--no-such-flag"])
    assert result.exit_code == 2


def test_module_error_produces_json_and_exit_1(runner, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("image_id,class_id,logit,probability\nimg,0,1.0,2.0\n")
    labels = tmp_path / "labels.jsonl"
    labels.write_text('{"image_id":"img","labels":[0]}\n')
    result = runner.invoke(
        main, ["metrics", "--pred", str(bad), "--labels", str(labels)]
    )
    assert result.exit_code == 1
    err = json.loads(result.output.strip().splitlines()[-1])
    assert err["error"]["type"] == "IngestError"
    assert "probability out of range" in err["error"]["message"]


def test_compare_on_reference_table(runner, tmp_path):
    out = tmp_path / "regression.json"
    result = invoke(runner, [
        "compare", "--table", str(DATA / "model_accuracies.csv"),
        "--out", str(out),
    ])
    assert result.exit_code == 0
    report = json.loads(out.read_text())
    assert report["second_half"]["slope"] < report["first_half"]["slope"]


def test_loss_check(runner):
    result = invoke(runner, ["loss-check", "--instances", "50"])
    assert result.exit_code == 0
    report = next(
        json.loads(line) for line in result.output.splitlines()
        if "max_relative_error" in line
    )
    assert report["max_relative_error"] <= 1e-5


def test_config_file_supplies_defaults(runner, tmp_path):
    fixture = build_pipeline_fixture(n_images=12, seed=3)
    paths = write_fixture_files(fixture, tmp_path / "fx")
    config = tmp_path / "run.cfg"
    config.write_text("top_logits = 40\ntop_probs = 40\n")
    out = tmp_path / "proposals.jsonl"
    result = invoke(runner, [
        "--config", str(config), "propose",
        "--pred-dir", str(paths["pred_dir"]),
        "--original-labels", str(paths["originals"]),
        "--out", str(out),
    ])
    assert result.exit_code == 0
    assert out.exists()


class TestPipelineEndToEnd:
    def run_pipeline(self, runner, tmp_path, fixture):
        paths = write_fixture_files(fixture, tmp_path / "fx")
        out = tmp_path / "out"
        out.mkdir()
        props = out / "proposals.jsonl"
        tasks = out / "tasks.jsonl"
        skips = out / "skips.json"
        answers = out / "answers.jsonl"
        labels = out / "labels.jsonl"
        report = out / "report.json"

        steps = [
            ["propose", "--pred-dir", str(paths["pred_dir"]),
             "--original-labels", str(paths["originals"]),
             "--top-logits", "100", "--top-probs", "100", "--out", str(props)],
            ["make-tasks", "--proposals", str(props),
             "--pred-dir", str(paths["pred_dir"]),
             "--original-labels", str(paths["originals"]),
             "--hierarchy", str(paths["hierarchy"]),
             "--manifest", str(paths["manifest"]),
             "--out", str(tasks), "--skips-out", str(skips)],
            ["simulate-raters", "--tasks", str(tasks),
             "--truth", str(paths["truth"]), "--out", str(answers)],
            ["aggregate", "--tasks", str(tasks), "--answers", str(answers),
             "--method", "ds", "--tau", "0.5", "--skips", str(skips),
             "--out", str(labels), "--report", str(report)],
            ["metrics", "--pred", str(paths["pred_dir"] / "model-0.npz"),
             "--labels", str(labels),
             "--original-labels", str(paths["originals"])],
        ]
        for step in steps:
            result = invoke(runner, step)
            assert result.exit_code == 0, f"{step[0]}: {result.output}"
        return paths, {"proposals": props, "tasks": tasks, "skips": skips,
                       "answers": answers, "labels": labels, "report": report}

    def test_smoke_recovers_planted_truth_under_10s(self, runner, tmp_path):
        fixture = build_pipeline_fixture(n_images=50, seed=7)
        start = time.perf_counter()
        _, artifacts = self.run_pipeline(runner, tmp_path, fixture)
        elapsed = time.perf_counter() - start
        recovered = ingest_labels(artifacts["labels"])
        assert recovered.labels == fixture.truth
        assert elapsed < 10.0

    def test_virtual_rater_flag_flows_through(self, runner, tmp_path):
        fixture = build_pipeline_fixture(n_images=20, seed=4)
        paths, artifacts = self.run_pipeline(runner, tmp_path, fixture)
        labels = tmp_path / "labels_vr.jsonl"
        report = tmp_path / "report_vr.json"
        result = invoke(runner, [
            "aggregate", "--tasks", str(artifacts["tasks"]),
            "--answers", str(artifacts["answers"]),
            "--method", "ds", "--tau", "0.5", "--virtual-rater", "on",
            "--original-labels", str(paths["originals"]),
            "--manifest", str(paths["manifest"]),
            "--skips", str(artifacts["skips"]),
            "--out", str(labels), "--report", str(report),
        ])
        assert result.exit_code == 0
        raters = json.loads(report.read_text())["raters"]
        assert "__original_label__" in raters
        # Noiseless raters overwhelm the pinned prior boost, so the
        # recovered labels still equal the planted truth.
        assert ingest_labels(labels).labels == fixture.truth

    def test_stages_are_idempotent(self, runner, tmp_path):
        fixture = build_pipeline_fixture(n_images=20, seed=9)
        _, first = self.run_pipeline(runner, tmp_path / "run1", fixture)
        _, second = self.run_pipeline(runner, tmp_path / "run2", fixture)
        for key in ("proposals", "tasks", "skips", "answers", "labels"):
            assert first[key].read_bytes() == second[key].read_bytes(), key


class TestOperatingPoint:
    def test_gold_drives_tau_when_not_given(self, runner, tmp_path):
        fixture = build_pipeline_fixture(n_images=30, seed=5)
        paths = write_fixture_files(fixture, tmp_path / "fx")
        out = tmp_path / "out"
        out.mkdir()
        props, tasks, skips, answers = (
            out / "p.jsonl", out / "t.jsonl", out / "s.json", out / "a.jsonl"
        )
        for step in (
            ["propose", "--pred-dir", str(paths["pred_dir"]),
             "--original-labels", str(paths["originals"]),
             "--top-logits", "60", "--top-probs", "60", "--out", str(props)],
            ["make-tasks", "--proposals", str(props),
             "--pred-dir", str(paths["pred_dir"]),
             "--original-labels", str(paths["originals"]),
             "--hierarchy", str(paths["hierarchy"]),
             "--manifest", str(paths["manifest"]),
             "--out", str(tasks), "--skips-out", str(skips)],
            ["simulate-raters", "--tasks", str(tasks),
             "--truth", str(paths["truth"]), "--out", str(answers)],
        ):
            assert invoke(runner, step).exit_code == 0

        labels = out / "labels.jsonl"
        report = out / "report.json"
        result = invoke(runner, [
            "aggregate", "--tasks", str(tasks), "--answers", str(answers),
            "--gold", str(paths["truth"]), "--skips", str(skips),
            "--out", str(labels), "--report", str(report),
        ])
        assert result.exit_code == 0
        body = json.loads(report.read_text())
        assert "pr_curve" in body and 0.0 <= body["tau"] <= 1.0
        # With noiseless raters the chosen point recovers the truth too.
        assert ingest_labels(labels).labels == fixture.truth


class TestAnalysisCommands:
    def test_select_curve_oracle_cooccur_curves(self, runner, tmp_path):
        fixture = build_pipeline_fixture(n_images=24, seed=13)
        paths = write_fixture_files(fixture, tmp_path / "fx")
        out = tmp_path / "out"
        out.mkdir()

        subset = out / "subset.json"
        result = invoke(runner, [
            "select-models", "--pred-dir", str(paths["pred_dir"]),
            "--original-labels", str(paths["originals"]),
            "--gold", str(paths["truth"]), "--recall-floor", "0.9",
            "--top-logits", "60", "--top-probs", "60", "--out", str(subset),
        ])
        assert result.exit_code == 0
        chosen = json.loads(subset.read_text())
        assert chosen["recall"] >= 0.9
        assert chosen["selected_models"]

        props, tasks, skips, answers = (
            out / "p.jsonl", out / "t.jsonl", out / "s.json", out / "a.jsonl"
        )
        for step in (
            ["propose", "--pred-dir", str(paths["pred_dir"]),
             "--original-labels", str(paths["originals"]),
             "--top-logits", "60", "--top-probs", "60", "--out", str(props)],
            ["make-tasks", "--proposals", str(props),
             "--pred-dir", str(paths["pred_dir"]),
             "--original-labels", str(paths["originals"]),
             "--hierarchy", str(paths["hierarchy"]),
             "--manifest", str(paths["manifest"]),
             "--out", str(tasks), "--skips-out", str(skips)],
            ["simulate-raters", "--tasks", str(tasks),
             "--truth", str(paths["truth"]), "--out", str(answers)],
        ):
            assert invoke(runner, step).exit_code == 0

        curve_out = out / "curve.json"
        result = invoke(runner, [
            "curve", "--tasks", str(tasks), "--answers", str(answers),
            "--gold", str(paths["truth"]), "--out", str(curve_out),
        ])
        assert result.exit_code == 0
        assert json.loads(curve_out.read_text())["curve"]

        oracle_out = out / "oracle.json"
        result = invoke(runner, [
            "oracle", "--labels", str(paths["truth"]),
            "--original-labels", str(paths["originals"]),
            "--manifest", str(paths["manifest"]), "--out", str(oracle_out),
        ])
        assert result.exit_code == 0
        oracle_report = json.loads(oracle_out.read_text())
        assert oracle_report["oracle_accuracy"]
        assert "ambiguous_count" in oracle_report

        # Pick an anchor that actually co-occurs in the planted truth.
        anchor = next(
            (sorted(s)[0] for s in fixture.truth.values() if len(s) > 1), None
        )
        assert anchor is not None
        result = invoke(runner, [
            "cooccur", "--labels", str(paths["truth"]),
            "--class", str(anchor), "--top-n", "3",
        ])
        assert result.exit_code == 0
        report_text = "\n".join(
            line for line in result.output.splitlines()
            if not line.startswith('{"event"')
        )
        assert json.loads(report_text)["cooccurring"]

        curves_out = out / "curves.csv"
        result = invoke(runner, [
            "curves", "--pred-dir", str(paths["pred_dir"]),
            "--labels", str(paths["truth"]),
            "--original-labels", str(paths["originals"]),
            "--classes", ",".join(
                str(c) for c in sorted({fixture.original_labels[i]
                                        for i in fixture.image_ids
                                        if fixture.original_labels[i] in fixture.truth[i]})
            ),
            "--out", str(curves_out),
        ])
        assert result.exit_code == 0
        header = curves_out.read_text().splitlines()[0].split(",")
        assert header[0] == "rank" and "oracle" in header


class TestAuditCli:
    def test_audit_make_then_aggregate(self, runner, tmp_path):
        fixture = build_pipeline_fixture(n_images=30, seed=11)
        paths = write_fixture_files(fixture, tmp_path / "fx")
        audit_tasks = tmp_path / "audit_tasks.jsonl"
        # Under the original-label metric the fixture's multi-label and
        # wrong-original images are genuine mistakes to audit.
        result = invoke(runner, [
            "audit", "make", "--pred", str(paths["pred_dir"] / "model-0.npz"),
            "--metric", "original", "--labels", str(paths["truth"]),
            "--original-labels", str(paths["originals"]),
            "--sample-size", "5", "--out", str(audit_tasks),
        ])
        assert result.exit_code == 0

        answers = tmp_path / "audit_answers.jsonl"
        result = invoke(runner, [
            "simulate-raters", "--tasks", str(audit_tasks),
            "--truth", str(paths["truth"]), "--out", str(answers),
        ])
        assert result.exit_code == 0

        accs = tmp_path / "accs.json"
        accs.write_text(json.dumps({"model-0": 0.8}))
        out = tmp_path / "audit.json"
        result = invoke(runner, [
            "audit", "aggregate", "--tasks", str(audit_tasks),
            "--answers", str(answers), "--accuracies", str(accs),
            "--out", str(out),
        ])
        assert result.exit_code == 0
        outcomes = json.loads(out.read_text())
        assert outcomes and outcomes[0]["model"] == "model-0"


class TestFoldsAndClean:
    def test_folds_then_clean(self, runner, tmp_path):
        import numpy as np

        from realabel.datamodel import export_predictions, save_original_labels
        from conftest import dense_pset

        images = [f"i{k:03d}" for k in range(40)]
        images_file = tmp_path / "images.txt"
        images_file.write_text("".join(f"{i}\n" for i in images))
        folds_file = tmp_path / "folds.json"
        result = invoke(runner, [
            "folds", "--images", str(images_file), "--n-folds", "4",
            "--out", str(folds_file),
        ])
        assert result.exit_code == 0

        originals = {img: k % 3 for k, img in enumerate(images)}
        originals_file = tmp_path / "orig.csv"
        save_original_labels(originals, originals_file)

        pred_dir = tmp_path / "fold_preds"
        pred_dir.mkdir()
        for fold in range(4):
            logits = np.zeros((40, 3))
            for k, img in enumerate(images):
                logits[k, originals[img]] = 4.0
            pset = dense_pset(f"cleaner{fold}", images, logits,
                              metadata={"trained_on_folds": [f for f in range(4) if f != fold]})
            export_predictions(pset, pred_dir / f"fold_{fold}.npz")

        retained = tmp_path / "retained.txt"
        removed = tmp_path / "removed.txt"
        result = invoke(runner, [
            "clean", "--fold-preds", str(pred_dir), "--folds", str(folds_file),
            "--original-labels", str(originals_file),
            "--retained-out", str(retained), "--removed-out", str(removed),
        ])
        assert result.exit_code == 0
        assert len(retained.read_text().splitlines()) == 40
        assert removed.read_text() == ""
