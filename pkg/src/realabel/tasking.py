"""Unanimity filtering and splitting proposal sets into rater tasks."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .datamodel import ProposalSet
from .errors import ContractError, IngestError, UnknownIdError
from .hierarchy import ClassHierarchy

KIND_LABEL = "label-assessment"
KIND_AUDIT = "mistake-audit"

AUDIT_CATEGORIES = ("clear-mistake", "not-a-mistake", "undecidable")
LABEL_VERDICTS = ("yes", "maybe", "no")

DEFAULT_MAX_OPTIONS = 8
DEFAULT_REQUIRED_RATERS = 5


@dataclass(frozen=True)
class AuditPayload:
    """What a mistake-audit task shows beyond the image itself."""

    model_name: str
    metric: str  # "original" or "real"
    predicted: int
    correct_labels: tuple[int, ...]
    exemplars: dict[int, tuple[str, ...]] = field(default_factory=dict, hash=False)


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    kind: str
    image_id: str
    options: tuple[int, ...] = ()
    audit: AuditPayload | None = None
    required_raters: int = DEFAULT_REQUIRED_RATERS

    def __post_init__(self):
        if self.kind == KIND_LABEL:
            if not 1 <= len(self.options):
                raise ContractError("label-assessment task needs at least one option")
            if len(set(self.options)) != len(self.options):
                raise ContractError("duplicate options in task")
        elif self.kind == KIND_AUDIT:
            if self.audit is None:
                raise ContractError("mistake-audit task needs an audit payload")
        else:
            raise ContractError(f"unknown task kind {self.kind!r}")

    @property
    def verdict_arity(self) -> int:
        return len(self.options) if self.kind == KIND_LABEL else 1


def task_id_for(kind: str, image_id: str, options=(), audit: AuditPayload | None = None) -> str:
    """Content-addressed task id: identical content yields identical id."""
    parts = [kind, image_id, ",".join(str(c) for c in sorted(options))]
    if audit is not None:
        parts.extend(
            [
                audit.model_name,
                audit.metric,
                str(audit.predicted),
                ",".join(str(c) for c in audit.correct_labels),
            ]
        )
    digest = hashlib.sha256("|".join(parts).encode("utf-8")).hexdigest()
    return digest[:16]


def make_label_task(
    image_id: str, options, required_raters: int = DEFAULT_REQUIRED_RATERS
) -> AnnotationTask:
    options = tuple(options)
    return AnnotationTask(
        task_id=task_id_for(KIND_LABEL, image_id, options),
        kind=KIND_LABEL,
        image_id=image_id,
        options=options,
        required_raters=required_raters,
    )


@dataclass(frozen=True)
class UnanimousSplit:
    """Images needing annotation vs. images keeping their original label."""

    keep: frozenset[str]
    skip_labels: dict[str, int]


def filter_unanimous(
    proposals: ProposalSet,
    predictions,
    original_labels: dict[str, int],
) -> UnanimousSplit:
    """Skip images where every model's top-1 equals the original label."""
    if not predictions:
        raise ContractError("at least one prediction set is required")
    images = set(proposals.proposals)
    for pset in predictions:
        if set(pset.image_ids) != images:
            raise ContractError(
                f"prediction set {pset.model_name!r} does not cover the "
                "proposal image set"
            )
    missing = images - original_labels.keys()
    if missing:
        raise UnknownIdError(f"no original label for image {sorted(missing)[0]!r}")
    keep: set[str] = set()
    skip: dict[str, int] = {}
    for img in images:
        orig = original_labels[img]
        if all(pset.top1(img) == orig for pset in predictions):
            skip[img] = orig
        else:
            keep.add(img)
    return UnanimousSplit(keep=frozenset(keep), skip_labels=skip)


def _cluster_options(
    labels: list[int], hierarchy: ClassHierarchy, max_options: int
) -> list[tuple[int, ...]]:
    """Agglomerative grouping under hierarchy distance, capped cluster size.

    Average-linkage; the closest mergeable pair merges first, ties broken
    by the clusters' smallest class ids. Terminates when no pair fits
    within ``max_options``.
    """
    clusters: list[tuple[int, ...]] = [(c,) for c in sorted(labels)]
    dist = {
        (a, b): hierarchy.class_distance(a, b)
        for i, a in enumerate(sorted(labels))
        for b in sorted(labels)[i + 1:]
    }

    def linkage(ca: tuple[int, ...], cb: tuple[int, ...]) -> float:
        total = sum(dist[(min(a, b), max(a, b))] for a in ca for b in cb)
        return total / (len(ca) * len(cb))

    while len(clusters) > 1:
        best = None
        for i in range(len(clusters)):
            for j in range(i + 1, len(clusters)):
                if len(clusters[i]) + len(clusters[j]) > max_options:
                    continue
                key = (linkage(clusters[i], clusters[j]), clusters[i], clusters[j])
                if best is None or key < best[0]:
                    best = (key, i, j)
        if best is None:
            break
        _, i, j = best
        merged = tuple(sorted(clusters[i] + clusters[j]))
        clusters = [c for k, c in enumerate(clusters) if k not in (i, j)]
        clusters.append(merged)
        clusters.sort()
    return sorted(clusters)


def split_tasks(
    proposals: ProposalSet,
    hierarchy: ClassHierarchy,
    max_options: int | None = DEFAULT_MAX_OPTIONS,
    *,
    keep: frozenset[str] | None = None,
    required_raters: int = DEFAULT_REQUIRED_RATERS,
) -> list[AnnotationTask]:
    """Turn proposals into label-assessment tasks of at most ``max_options``.

    Images with more proposals than the cap are partitioned so that
    hierarchy-close labels share a task. ``keep`` restricts the image set
    (the output of filter_unanimous); None means all proposal images.
    """
    if max_options is not None and max_options < 2:
        raise ContractError("max_options must be >= 2")
    images = sorted(proposals.proposals if keep is None else keep)
    unknown = set(images) - set(proposals.proposals)
    if unknown:
        raise UnknownIdError(f"image {sorted(unknown)[0]!r} has no proposals")
    tasks: list[AnnotationTask] = []
    for img in images:
        labels = sorted(proposals.proposals[img])
        if not labels:
            raise ContractError(f"image {img!r} has an empty proposal set")
        if max_options is None or len(labels) <= max_options:
            tasks.append(make_label_task(img, labels, required_raters))
            continue
        for group in _cluster_options(labels, hierarchy, max_options):
            tasks.append(make_label_task(img, group, required_raters))
    return tasks


# -- serialization ---------------------------------------------------------


def task_to_json(task: AnnotationTask) -> dict:
    obj = {
        "task_id": task.task_id,
        "kind": task.kind,
        "image_id": task.image_id,
        "options": list(task.options),
        "required_raters": task.required_raters,
    }
    if task.audit is not None:
        obj["audit"] = {
            "model": task.audit.model_name,
            "metric": task.audit.metric,
            "predicted": task.audit.predicted,
            "correct_labels": list(task.audit.correct_labels),
            "exemplars": {
                str(c): list(v) for c, v in sorted(task.audit.exemplars.items())
            },
        }
    return obj


def task_from_json(obj: dict) -> AnnotationTask:
    audit = None
    if obj.get("audit"):
        a = obj["audit"]
        audit = AuditPayload(
            model_name=a["model"],
            metric=a["metric"],
            predicted=int(a["predicted"]),
            correct_labels=tuple(int(c) for c in a["correct_labels"]),
            exemplars={
                int(c): tuple(v) for c, v in a.get("exemplars", {}).items()
            },
        )
    return AnnotationTask(
        task_id=obj["task_id"],
        kind=obj["kind"],
        image_id=obj["image_id"],
        options=tuple(int(c) for c in obj.get("options", [])),
        audit=audit,
        required_raters=int(obj.get("required_raters", DEFAULT_REQUIRED_RATERS)),
    )


def export_tasks(tasks: list[AnnotationTask], path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for task in tasks:
            fh.write(json.dumps(task_to_json(task), separators=(",", ":")) + "\n")


def ingest_tasks(path) -> list[AnnotationTask]:
    path = Path(path)
    tasks = []
    seen = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                task = task_from_json(json.loads(line))
            except (json.JSONDecodeError, KeyError, ContractError) as exc:
                raise IngestError(f"bad task: {exc}", path=path, line=lineno) from None
            if task.task_id in seen:
                raise IngestError(
                    f"duplicate task id {task.task_id}", path=path, line=lineno
                )
            seen.add(task.task_id)
            tasks.append(task)
    return tasks
