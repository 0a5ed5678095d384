"""Label-bias analysis: unbiased-oracle accuracy, co-occurrence statistics,
sorted class-accuracy curves, and the mistake-audit workflow."""

from __future__ import annotations

import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .annotation import RaterAnswer
from .datamodel import PredictionSet, ReaLLabelSet
from .errors import ContractError, UnknownIdError
from .tasking import (
    AUDIT_CATEGORIES,
    AnnotationTask,
    AuditPayload,
    KIND_AUDIT,
    task_id_for,
)

METRIC_ORIGINAL = "original"
METRIC_REAL = "real"


@dataclass(frozen=True)
class ClassReport:
    class_id: int
    oracle_accuracy: float
    model_accuracies: dict[str, float]
    top_cooccurring: tuple[tuple[int, float], ...]
    n_images: int


@dataclass(frozen=True)
class AuditOutcome:
    model: str
    metric: str
    proportions: tuple[float, float, float]  # clear / not-a-mistake / undecidable
    n: int

    def __post_init__(self):
        if abs(sum(self.proportions) - 1.0) > 1e-9:
            raise ContractError("audit proportions must sum to 1")


def _qualifying_images(
    labels: ReaLLabelSet, original_labels: dict[str, int]
) -> list[str]:
    """Non-excluded images whose original label survived into the label set."""
    out = []
    for img in labels.non_excluded():
        if img not in original_labels:
            raise UnknownIdError(f"image {img!r} has no original label")
        if original_labels[img] in labels[img]:
            out.append(img)
    return out


def oracle_accuracy(
    labels: ReaLLabelSet, original_labels: dict[str, int]
) -> dict[int, float]:
    """Expected per-class accuracy of a predictor drawing uniformly from
    each image's label set, under the original single-label metric.

    Classes with no qualifying image are absent from the result.
    """
    sums: dict[int, float] = defaultdict(float)
    counts: Counter[int] = Counter()
    for img in _qualifying_images(labels, original_labels):
        cls = original_labels[img]
        sums[cls] += 1.0 / len(labels[img])
        counts[cls] += 1
    return {cls: sums[cls] / counts[cls] for cls in sorted(sums)}


def ambiguous_classes(
    oracle: dict[int, float], manifest, ceiling: float = 0.90
) -> set[int]:
    """Classes below the oracle ceiling, minus fine-grained animal classes."""
    finegrained = manifest.finegrained_animal_classes()
    return {
        cls
        for cls, acc in oracle.items()
        if acc < ceiling and cls not in finegrained
    }


def cooccurrence(
    labels: ReaLLabelSet, anchor: int, top_n: int = 10
) -> list[tuple[int, float]]:
    """Rates at which other classes share label sets with the anchor class."""
    anchor_images = [img for img in labels.non_excluded() if anchor in labels[img]]
    if not anchor_images:
        raise ContractError(f"class {anchor} appears in no label set")
    counts: Counter[int] = Counter()
    for img in anchor_images:
        for cls in labels[img]:
            if cls != anchor:
                counts[cls] += 1
    rates = [(cls, n / len(anchor_images)) for cls, n in counts.items()]
    rates.sort(key=lambda r: (-r[1], r[0]))
    return rates[:top_n]


def per_class_original_accuracy(
    predictions: PredictionSet,
    labels: ReaLLabelSet,
    original_labels: dict[str, int],
    class_subset,
) -> dict[int, float]:
    """Top-1 accuracy against the original label, per class, over the same
    qualifying images the oracle is scored on."""
    subset = set(class_subset)
    hits: Counter[int] = Counter()
    totals: Counter[int] = Counter()
    for img in _qualifying_images(labels, original_labels):
        cls = original_labels[img]
        if cls not in subset:
            continue
        totals[cls] += 1
        if predictions.top1(img) == cls:
            hits[cls] += 1
    return {cls: hits[cls] / totals[cls] for cls in totals}


def class_accuracy_curves(
    predictions: list[PredictionSet],
    labels: ReaLLabelSet,
    original_labels: dict[str, int],
    class_subset,
) -> dict[str, list[float]]:
    """Independently sorted per-class accuracy curves, plus the oracle curve.

    Each curve is ascending, ready for plotting; keys are model names and
    ``oracle``.
    """
    subset = sorted(set(class_subset))
    if not subset:
        raise ContractError("class subset is empty")
    oracle = oracle_accuracy(labels, original_labels)
    missing = [c for c in subset if c not in oracle]
    if missing:
        raise ContractError(
            f"class {missing[0]} has no qualifying images for the oracle"
        )
    curves: dict[str, list[float]] = {
        "oracle": sorted(oracle[c] for c in subset)
    }
    for pset in predictions:
        acc = per_class_original_accuracy(pset, labels, original_labels, subset)
        curves[pset.model_name] = sorted(acc.get(c, 0.0) for c in subset)
    return curves


def mistaken_images(
    predictions: PredictionSet,
    metric: str,
    labels: ReaLLabelSet,
    original_labels: dict[str, int],
) -> list[str]:
    """Images the model gets wrong under the chosen metric, sorted by id."""
    if metric == METRIC_ORIGINAL:
        return sorted(
            img
            for img, cls in original_labels.items()
            if predictions.top1(img) != cls
        )
    if metric == METRIC_REAL:
        return sorted(
            img
            for img in labels.non_excluded()
            if predictions.top1(img) not in labels[img]
        )
    raise ContractError(f"unknown metric {metric!r}")


def make_audit_tasks(
    predictions: PredictionSet,
    metric: str,
    labels: ReaLLabelSet,
    original_labels: dict[str, int],
    *,
    exemplars_per_class: int = 3,
    sample_size: int | None = None,
    seed: int = 0,
    required_raters: int = 5,
) -> list[AnnotationTask]:
    """Sample mistaken images into audit tasks with exemplar context.

    Each task shows the predicted label, the metric's correct label(s),
    and up to ``exemplars_per_class`` exemplar image ids per correct label.
    Deterministic under the seed; an oversized sample is clamped.
    """
    mistakes = mistaken_images(predictions, metric, labels, original_labels)
    if not mistakes:
        return []
    rng = np.random.default_rng(seed)
    if sample_size is None:
        sample_size = len(mistakes)
    if sample_size > len(mistakes):
        warnings.warn(
            f"sample_size {sample_size} exceeds {len(mistakes)} mistakes; clamping",
            stacklevel=2,
        )
        sample_size = len(mistakes)
    chosen = sorted(rng.choice(len(mistakes), size=sample_size, replace=False))
    by_class: dict[int, list[str]] = defaultdict(list)
    for img in sorted(labels.labels):
        for cls in labels.labels[img]:
            by_class[cls].append(img)

    tasks = []
    for idx in chosen:
        img = mistakes[idx]
        predicted = predictions.top1(img)
        if metric == METRIC_ORIGINAL:
            correct = (original_labels[img],)
        else:
            correct = tuple(sorted(labels[img]))
        exemplars = {}
        for cls in correct:
            pool = [e for e in by_class.get(cls, []) if e != img]
            order = rng.permutation(len(pool))
            exemplars[cls] = tuple(pool[i] for i in order[:exemplars_per_class])
        payload = AuditPayload(
            model_name=predictions.model_name,
            metric=metric,
            predicted=predicted,
            correct_labels=correct,
            exemplars=exemplars,
        )
        tasks.append(
            AnnotationTask(
                task_id=task_id_for(KIND_AUDIT, img, audit=payload),
                kind=KIND_AUDIT,
                image_id=img,
                audit=payload,
                required_raters=required_raters,
            )
        )
    return tasks


def aggregate_audit(
    answers: list[RaterAnswer],
    tasks: list[AnnotationTask],
    model_original_accuracy: dict[str, float],
) -> list[AuditOutcome]:
    """Per (model, metric) category proportions from majority-per-task votes.

    A task's category is the strict plurality of its answers; ties count as
    undecidable. Output is ordered by ascending model original accuracy.
    """
    audit_tasks = {t.task_id: t for t in tasks if t.kind == KIND_AUDIT}
    votes: dict[str, Counter] = defaultdict(Counter)
    for ans in answers:
        task = audit_tasks.get(ans.task_id)
        if task is None:
            continue
        votes[task.task_id][ans.verdicts[0]] += 1

    grouped: dict[tuple[str, str], Counter] = defaultdict(Counter)
    for tid, counter in votes.items():
        task = audit_tasks[tid]
        top = counter.most_common()
        if len(top) > 1 and top[0][1] == top[1][1]:
            category = "undecidable"
        else:
            category = top[0][0]
        grouped[(task.audit.model_name, task.audit.metric)][category] += 1

    outcomes = []
    for (model, metric), counter in grouped.items():
        if model not in model_original_accuracy:
            raise UnknownIdError(f"no original accuracy for model {model!r}")
        n = sum(counter.values())
        outcomes.append(
            AuditOutcome(
                model=model,
                metric=metric,
                proportions=tuple(counter[c] / n for c in AUDIT_CATEGORIES),
                n=n,
            )
        )
    outcomes.sort(key=lambda o: (model_original_accuracy[o.model], o.model, o.metric))
    return outcomes
