"""Single entry point tying the pipeline stages together.

Every stage reads and writes plain files so reruns are idempotent; a
shared key=value config file supplies defaults and flags override it.
Module errors exit 1 with a machine-readable JSON object on stderr;
usage errors exit 2.
"""

from __future__ import annotations

import functools
import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import aggregation, analysis, annotation, metrics, proposals, tasking, trainfix
from .datamodel import (
    ReaLLabelSet,
    export_labels,
    export_proposals,
    ingest_labels,
    ingest_predictions,
    ingest_proposals,
    load_class_manifest,
    load_gold_standard,
    load_original_labels,
)
from .errors import RealabelError
from .hierarchy import load_hierarchy


def _log(event: str, **fields) -> None:
    payload = {"event": event, **fields}
    click.echo(json.dumps(payload, separators=(",", ":"), default=str), err=True)


def _fail(exc: Exception) -> None:
    obj = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    click.echo(json.dumps(obj, separators=(",", ":")), err=True)
    sys.exit(1)


def stage(fn):
    """Wrap a command: time it and convert module errors to exit 1."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        try:
            fn(*args, **kwargs)
        except (RealabelError, ValueError, KeyError, OSError) as exc:
            _fail(exc)
        _log("stage-complete", stage=fn.__name__, seconds=round(time.perf_counter() - start, 3))

    return wrapper


def _read_config(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    config: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise click.UsageError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        config[key.strip()] = value.strip()
    return config


def _cfg(ctx, key: str, flag_value, cast=str):
    """Flag wins; otherwise the config file; otherwise None."""
    if flag_value is not None:
        return flag_value
    raw = ctx.obj["config"].get(key)
    return cast(raw) if raw is not None else None


def _load_prediction_sets(pred_paths, pred_dir, n_classes=None):
    paths: list[Path] = [Path(p) for p in pred_paths]
    if pred_dir is not None:
        paths.extend(
            sorted(
                p
                for p in Path(pred_dir).iterdir()
                if p.suffix in (".csv", ".npz")
            )
        )
    if not paths:
        raise click.UsageError("no prediction files given (--pred/--pred-dir)")
    return [ingest_predictions(p, n_classes=n_classes) for p in paths]


def _write_json(path, obj) -> None:
    Path(path).write_text(
        json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n",
        encoding="utf-8",
    )


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Key=value config file; flags override it.")
@click.option("--threads", type=int, default=1, show_default=True,
              help="Parallelism cap for stages that support it.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def main(ctx, config_path, threads, seed):
    """Relabeling pipeline: proposals, tasks, aggregation, and metrics."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = _read_config(config_path)
    ctx.obj["threads"] = threads
    ctx.obj["seed"] = seed


@main.command()
@click.option("--pred", "pred_paths", multiple=True, type=click.Path())
@click.option("--pred-dir", type=click.Path(), default=None)
@click.option("--original-labels", "original_path", type=click.Path(), required=True)
@click.option("--top-logits", type=int, default=None, help="Logit channel size per model.")
@click.option("--top-probs", type=int, default=None, help="Probability channel size per model.")
@click.option("--global-pool", is_flag=True, default=False,
              help="Apply the top-K cutoffs across all models jointly.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_context
@stage
def propose(ctx, pred_paths, pred_dir, original_path, top_logits, top_probs, global_pool, out_path):
    """Generate label proposals from model predictions."""
    psets = _load_prediction_sets(pred_paths, pred_dir)
    originals = load_original_labels(original_path)
    config = proposals.PoolingConfig(
        top_logit_count=_cfg(ctx, "top_logits", top_logits, int) or 150_000,
        top_prob_count=_cfg(ctx, "top_probs", top_probs, int) or 150_000,
        global_pool=global_pool,
    )
    props = proposals.generate_proposals(psets, originals, config)
    export_proposals(props, out_path)
    _log("proposals-written", images=len(props.proposals),
         mean_per_image=round(props.mean_proposals_per_image(), 3))


@main.command("select-models")
@click.option("--pred", "pred_paths", multiple=True, type=click.Path())
@click.option("--pred-dir", type=click.Path(), default=None)
@click.option("--original-labels", "original_path", type=click.Path(), required=True)
@click.option("--gold", "gold_path", type=click.Path(), required=True)
@click.option("--recall-floor", type=float, default=None)
@click.option("--top-logits", type=int, default=None)
@click.option("--top-probs", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_context
@stage
def select_models(ctx, pred_paths, pred_dir, original_path, gold_path, recall_floor,
                  top_logits, top_probs, out_path):
    """Exhaustive model-subset search against the gold standard."""
    psets = _load_prediction_sets(pred_paths, pred_dir)
    originals = load_original_labels(original_path)
    gold = load_gold_standard(gold_path)
    config = proposals.PoolingConfig(
        top_logit_count=_cfg(ctx, "top_logits", top_logits, int) or 150_000,
        top_prob_count=_cfg(ctx, "top_probs", top_probs, int) or 150_000,
    )
    floor = _cfg(ctx, "recall_floor", recall_floor, float)
    result = proposals.select_subset(
        psets, originals, gold,
        recall_floor=0.97 if floor is None else floor,
        config=config, threads=ctx.obj["threads"],
    )
    _write_json(out_path, {
        "selected_models": list(result.selected_models),
        "precision": result.precision,
        "recall": result.recall,
        "mean_proposals_per_image": result.mean_proposals_per_image,
    })


@main.command("make-tasks")
@click.option("--proposals", "proposals_path", type=click.Path(), required=True)
@click.option("--pred", "pred_paths", multiple=True, type=click.Path())
@click.option("--pred-dir", type=click.Path(), default=None)
@click.option("--original-labels", "original_path", type=click.Path(), required=True)
@click.option("--hierarchy", "hierarchy_path", type=click.Path(), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(), required=True)
@click.option("--max-options", type=int, default=8, show_default=True)
@click.option("--required-raters", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--skips-out", type=click.Path(), required=True,
              help="Where to record unanimity-skipped images and their labels.")
@click.pass_context
@stage
def make_tasks(ctx, proposals_path, pred_paths, pred_dir, original_path, hierarchy_path,
               manifest_path, max_options, required_raters, out_path, skips_out):
    """Filter unanimous images and split the rest into rater tasks."""
    props = ingest_proposals(proposals_path)
    psets = _load_prediction_sets(pred_paths, pred_dir)
    originals = load_original_labels(original_path)
    hier = load_hierarchy(hierarchy_path)
    hier.map_classes(load_class_manifest(manifest_path))
    split = tasking.filter_unanimous(props, psets, originals)
    raters = _cfg(ctx, "required_raters", required_raters, int) or 5
    tasks = tasking.split_tasks(
        props, hier, max_options, keep=split.keep, required_raters=raters
    )
    tasking.export_tasks(tasks, out_path)
    _write_json(skips_out, {img: split.skip_labels[img] for img in sorted(split.skip_labels)})
    _log("tasks-written", kept_images=len(split.keep),
         skipped_images=len(split.skip_labels), tasks=len(tasks))


@main.command()
@click.option("--tasks", "tasks_path", type=click.Path(), required=True)
@click.option("--answers", "answers_path", type=click.Path(), required=True,
              help="Append-only answer log; replayed if it exists.")
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--image-base-url", default="/images", show_default=True)
@click.option("--ui-dir", type=click.Path(), default=None)
@stage
def serve(tasks_path, answers_path, port, image_base_url, ui_dir):
    """Run the annotation HTTP service."""
    from .server import run_server

    tasks = tasking.ingest_tasks(tasks_path)
    service = annotation.TaskService(tasks, log_path=answers_path)
    _log("serving", tasks=len(tasks), port=port)
    run_server(service, port=port, image_base_url=image_base_url, ui_dir=ui_dir)


@main.command("simulate-raters")
@click.option("--tasks", "tasks_path", type=click.Path(), required=True)
@click.option("--truth", "truth_path", type=click.Path(), required=True,
              help="Label file used as planted ground truth.")
@click.option("--profiles", "profiles_path", type=click.Path(), default=None,
              help="JSON list of rater profiles; default: 5 noiseless raters.")
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@stage
def simulate_raters(tasks_path, truth_path, profiles_path, manifest_path, out_path):
    """Answer every task with simulated raters."""
    tasks = tasking.ingest_tasks(tasks_path)
    truth = ingest_labels(truth_path)
    profiles = (
        annotation.load_profiles(profiles_path)
        if profiles_path
        else annotation.noiseless_profiles(5)
    )
    manifest = load_class_manifest(manifest_path) if manifest_path else None
    answers = annotation.simulate_raters(tasks, truth, profiles, manifest=manifest)
    annotation.export_answers(answers, out_path)
    _log("answers-written", answers=len(answers), raters=len(profiles))


@main.command()
@click.option("--tasks", "tasks_path", type=click.Path(), required=True)
@click.option("--answers", "answers_path", type=click.Path(), required=True)
@click.option("--method", type=click.Choice(["ds", "majority"]), default="ds", show_default=True)
@click.option("--tau", type=float, default=None, help="Posterior acceptance threshold.")
@click.option("--gold", "gold_path", type=click.Path(), default=None,
              help="With no --tau: pick the smallest tau whose gold precision "
                   "meets --min-precision.")
@click.option("--min-precision", type=float, default=0.95, show_default=True)
@click.option("--virtual-rater", type=click.Choice(["on", "off"]), default="off", show_default=True)
@click.option("--original-labels", "original_path", type=click.Path(), default=None)
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--skips", "skips_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.pass_context
@stage
def aggregate(ctx, tasks_path, answers_path, method, tau, gold_path, min_precision,
              virtual_rater, original_path, manifest_path, skips_path, out_path,
              report_path):
    """Aggregate rater answers into final label sets."""
    tasks = tasking.ingest_tasks(tasks_path)
    answers = annotation.ingest_answers(answers_path)
    skips = {}
    if skips_path:
        skips = {k: int(v) for k, v in json.loads(Path(skips_path).read_text()).items()}
    tau = _cfg(ctx, "tau", tau, float)
    if method == "majority":
        accepted = aggregation.majority_vote(answers, tasks)
        result: dict[str, set[int]] = {t.image_id: set() for t in tasks if t.kind == tasking.KIND_LABEL}
        for img, cls in accepted:
            result[img].add(cls)
        for img, cls in skips.items():
            result.setdefault(img, set()).add(cls)
        labels = ReaLLabelSet({img: frozenset(s) for img, s in result.items()})
        report = {"method": "majority", "accepted_items": len(accepted)}
    else:
        model = aggregation.run_dawid_skene(
            answers, tasks,
            virtual_rater=virtual_rater == "on",
            original_labels=load_original_labels(original_path) if original_path else None,
            manifest=load_class_manifest(manifest_path) if manifest_path else None,
        )
        report = {"method": "ds", **model.to_report()}
        if tau is None and gold_path:
            gold = load_gold_standard(gold_path)
            pr = aggregation.precision_recall_curve(model, gold)
            tau = aggregation.choose_operating_point(pr, min_precision)
            report["pr_curve"] = [
                {"tau": t, "precision": p, "recall": r} for t, p, r in pr
            ]
        if tau is None:
            tau = 0.5
        labels = aggregation.finalize_labels(model, tau, skips)
        report["tau"] = tau
    export_labels(labels, out_path)
    if report_path:
        _write_json(report_path, report)
    _log("labels-written", images=len(labels.labels),
         labels=labels.label_count(),
         excluded=sum(1 for img in labels.labels if labels.is_excluded(img)))


@main.command()
@click.option("--tasks", "tasks_path", type=click.Path(), required=True)
@click.option("--answers", "answers_path", type=click.Path(), required=True)
@click.option("--gold", "gold_path", type=click.Path(), required=True)
@click.option("--virtual-rater", type=click.Choice(["on", "off"]), default="off")
@click.option("--original-labels", "original_path", type=click.Path(), default=None)
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@stage
def curve(tasks_path, answers_path, gold_path, virtual_rater, original_path, manifest_path, out_path):
    """Precision/recall sweep of the aggregation posterior against gold."""
    tasks = tasking.ingest_tasks(tasks_path)
    answers = annotation.ingest_answers(answers_path)
    gold = load_gold_standard(gold_path)
    model = aggregation.run_dawid_skene(
        answers, tasks,
        virtual_rater=virtual_rater == "on",
        original_labels=load_original_labels(original_path) if original_path else None,
        manifest=load_class_manifest(manifest_path) if manifest_path else None,
    )
    pr = aggregation.precision_recall_curve(model, gold)
    _write_json(out_path, {"curve": [
        {"tau": t, "precision": p, "recall": r} for t, p, r in pr
    ]})


@main.command("metrics")
@click.option("--pred", "pred_path", type=click.Path(), required=True)
@click.option("--labels", "labels_path", type=click.Path(), required=True)
@click.option("--original-labels", "original_path", type=click.Path(), default=None)
@click.option("--k", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@stage
def metrics_cmd(pred_path, labels_path, original_path, k, out_path):
    """Set-based and original accuracy of one prediction file."""
    pset = ingest_predictions(pred_path)
    labels = ingest_labels(labels_path)
    report = {
        "model": pset.model_name,
        f"real_top{k}": metrics.real_accuracy(pset, labels, k),
        "evaluated_images": len(labels.non_excluded()),
    }
    if original_path:
        originals = load_original_labels(original_path)
        report["original_top1"] = metrics.original_accuracy(pset, originals)
        rate, n = metrics.preference_rate(pset, originals, labels)
        report["preference_rate"] = rate
        report["discriminating_images"] = n
    payload = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(payload + "\n", encoding="utf-8")
    else:
        click.echo(payload)


@main.command()
@click.option("--table", "table_path", type=click.Path(), required=True,
              help="CSV with header model,real_acc,orig_acc.")
@click.option("--include", "include", multiple=True,
              help="Model names to include; default: all rows.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@stage
def compare(table_path, include, out_path):
    """Two-segment regression of set-based on original accuracy."""
    import csv as _csv

    points = []
    with Path(table_path).open(newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames != ["model", "real_acc", "orig_acc"]:
            raise RealabelError("expected header model,real_acc,orig_acc")
        for row in reader:
            if include and row["model"] not in include:
                continue
            points.append((float(row["orig_acc"]), float(row["real_acc"])))
    result = metrics.split_regression(points)
    report = {
        "n_points": len(points),
        "first_half": {"slope": result.first.slope, "stderr": result.first.slope_std_error,
                       "n": result.first.n},
        "second_half": {"slope": result.second.slope, "stderr": result.second.slope_std_error,
                        "n": result.second.n},
        "z": result.z_statistic,
        "p_value": result.p_value,
    }
    payload = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(payload + "\n", encoding="utf-8")
    else:
        click.echo(payload)


@main.command()
@click.option("--labels", "labels_path", type=click.Path(), required=True)
@click.option("--original-labels", "original_path", type=click.Path(), required=True)
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--ceiling", type=float, default=0.90, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@stage
def oracle(labels_path, original_path, manifest_path, ceiling, out_path):
    """Per-class unbiased-oracle accuracy and the ambiguous-class set."""
    labels = ingest_labels(labels_path)
    originals = load_original_labels(original_path)
    acc = analysis.oracle_accuracy(labels, originals)
    report: dict = {"oracle_accuracy": {str(c): v for c, v in acc.items()}}
    if manifest_path:
        manifest = load_class_manifest(manifest_path)
        ambiguous = analysis.ambiguous_classes(acc, manifest, ceiling)
        report["ambiguous_classes"] = sorted(ambiguous)
        report["ambiguous_count"] = len(ambiguous)
    _write_json(out_path, report)


@main.command()
@click.option("--labels", "labels_path", type=click.Path(), required=True)
@click.option("--class", "anchor", type=int, required=True)
@click.option("--top-n", type=int, default=10, show_default=True)
@stage
def cooccur(labels_path, anchor, top_n):
    """Classes co-occurring with an anchor class."""
    labels = ingest_labels(labels_path)
    rates = analysis.cooccurrence(labels, anchor, top_n)
    click.echo(json.dumps(
        {"anchor": anchor, "cooccurring": [{"class_id": c, "rate": r} for c, r in rates]},
        indent=2,
    ))


@main.command()
@click.option("--pred", "pred_paths", multiple=True, type=click.Path())
@click.option("--pred-dir", type=click.Path(), default=None)
@click.option("--labels", "labels_path", type=click.Path(), required=True)
@click.option("--original-labels", "original_path", type=click.Path(), required=True)
@click.option("--classes", "class_list", default=None,
              help="Comma-separated class ids; default: ambiguous classes.")
@click.option("--manifest", "manifest_path", type=click.Path(), default=None)
@click.option("--ceiling", type=float, default=0.90, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@stage
def curves(pred_paths, pred_dir, labels_path, original_path, class_list, manifest_path,
           ceiling, out_path):
    """Sorted per-class accuracy curves (CSV, one column per model)."""
    psets = _load_prediction_sets(pred_paths, pred_dir)
    labels = ingest_labels(labels_path)
    originals = load_original_labels(original_path)
    if class_list:
        subset = [int(c) for c in class_list.split(",")]
    else:
        if not manifest_path:
            raise RealabelError("--classes or --manifest required")
        acc = analysis.oracle_accuracy(labels, originals)
        subset = sorted(analysis.ambiguous_classes(
            acc, load_class_manifest(manifest_path), ceiling
        ))
    table = analysis.class_accuracy_curves(psets, labels, originals, subset)
    names = sorted(table)
    lines = [",".join(["rank"] + names)]
    for i in range(len(subset)):
        lines.append(",".join([str(i)] + [repr(table[n][i]) for n in names]))
    Path(out_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@main.group()
def audit():
    """Mistake-audit task generation and aggregation."""


@audit.command("make")
@click.option("--pred", "pred_path", type=click.Path(), required=True)
@click.option("--metric", type=click.Choice(["original", "real"]), required=True)
@click.option("--labels", "labels_path", type=click.Path(), required=True)
@click.option("--original-labels", "original_path", type=click.Path(), required=True)
@click.option("--sample-size", type=int, default=None)
@click.option("--exemplars", type=int, default=3, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_context
@stage
def audit_make(ctx, pred_path, metric, labels_path, original_path, sample_size, exemplars, out_path):
    pset = ingest_predictions(pred_path)
    labels = ingest_labels(labels_path)
    originals = load_original_labels(original_path)
    tasks = analysis.make_audit_tasks(
        pset, metric, labels, originals,
        exemplars_per_class=exemplars, sample_size=sample_size,
        seed=ctx.obj["seed"],
    )
    tasking.export_tasks(tasks, out_path)
    _log("audit-tasks-written", tasks=len(tasks))


@audit.command("aggregate")
@click.option("--tasks", "tasks_path", type=click.Path(), required=True)
@click.option("--answers", "answers_path", type=click.Path(), required=True)
@click.option("--accuracies", "acc_path", type=click.Path(), required=True,
              help="JSON mapping model name -> original accuracy, for ordering.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@stage
def audit_aggregate(tasks_path, answers_path, acc_path, out_path):
    tasks = tasking.ingest_tasks(tasks_path)
    answers = annotation.ingest_answers(answers_path)
    accs = {k: float(v) for k, v in json.loads(Path(acc_path).read_text()).items()}
    outcomes = analysis.aggregate_audit(answers, tasks, accs)
    _write_json(out_path, [
        {"model": o.model, "metric": o.metric, "n": o.n,
         "clear_mistake": o.proportions[0], "not_a_mistake": o.proportions[1],
         "undecidable": o.proportions[2]}
        for o in outcomes
    ])


@main.command()
@click.option("--images", "images_path", type=click.Path(), required=True,
              help="Plain-text file, one image id per line.")
@click.option("--n-folds", type=int, default=10, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_context
@stage
def folds(ctx, images_path, n_folds, out_path):
    """Assign images to balanced folds."""
    ids = [l.strip() for l in Path(images_path).read_text().splitlines() if l.strip()]
    assignment = trainfix.assign_folds(ids, n_folds, seed=ctx.obj["seed"])
    _write_json(out_path, {
        "n_folds": assignment.n_folds,
        "seed": assignment.seed,
        "assignment": {img: assignment.assignment[img] for img in sorted(assignment.assignment)},
    })


@main.command()
@click.option("--fold-preds", "fold_dir", type=click.Path(), required=True,
              help="Directory of fold_<k>.csv/.npz prediction files.")
@click.option("--folds", "folds_path", type=click.Path(), required=True)
@click.option("--original-labels", "original_path", type=click.Path(), required=True)
@click.option("--min-prob", type=float, default=None)
@click.option("--retained-out", type=click.Path(), required=True)
@click.option("--removed-out", type=click.Path(), required=True)
@stage
def clean(fold_dir, folds_path, original_path, min_prob, retained_out, removed_out):
    """Drop images whose held-out prediction contradicts the original label."""
    spec = json.loads(Path(folds_path).read_text())
    assignment = trainfix.FoldAssignment(
        assignment={k: int(v) for k, v in spec["assignment"].items()},
        n_folds=int(spec["n_folds"]),
        seed=int(spec["seed"]),
    )
    fold_predictions = {}
    for path in sorted(Path(fold_dir).iterdir()):
        if path.suffix not in (".csv", ".npz") or not path.stem.startswith("fold_"):
            continue
        fold_predictions[int(path.stem.removeprefix("fold_"))] = ingest_predictions(path)
    originals = load_original_labels(original_path)
    retained, removed = trainfix.clean_dataset(
        fold_predictions, originals, assignment, min_prob=min_prob
    )
    Path(retained_out).write_text("".join(f"{i}\n" for i in sorted(retained)), encoding="utf-8")
    Path(removed_out).write_text("".join(f"{i}\n" for i in sorted(removed)), encoding="utf-8")
    _log("cleaned", retained=len(retained), removed=len(removed))


@main.command("loss-check")
@click.option("--instances", type=int, default=1000, show_default=True)
@click.option("--max-classes", type=int, default=50, show_default=True)
@click.pass_context
@stage
def loss_check(ctx, instances, max_classes):
    """Finite-difference check of both loss gradients."""
    rng = np.random.default_rng(ctx.obj["seed"])
    worst = 0.0
    h = 1e-6
    for _ in range(instances):
        c = int(rng.integers(2, max_classes + 1))
        z = rng.normal(0, 3, size=c)
        target = int(rng.integers(c))
        t = (rng.random(c) < 0.3).astype(float)
        for loss_fn, grad in (
            (lambda v: trainfix.softmax_ce(v, target).loss, trainfix.softmax_ce(z, target).gradient),
            (lambda v: trainfix.sigmoid_bce(v, t).loss, trainfix.sigmoid_bce(z, t).gradient),
        ):
            fd = np.zeros(c)
            for j in range(c):
                dz = np.zeros(c)
                dz[j] = h
                fd[j] = (loss_fn(z + dz) - loss_fn(z - dz)) / (2 * h)
            rel = np.linalg.norm(fd - grad) / max(np.linalg.norm(grad), 1e-12)
            worst = max(worst, rel)
    click.echo(json.dumps({"instances": instances, "max_relative_error": worst}))


if __name__ == "__main__":
    main()
