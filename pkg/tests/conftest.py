"""Shared synthetic fixtures: a small planted-truth dataset the whole
pipeline can run on, plus builders for prediction sets and manifests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from realabel.datamodel import ClassInfo, ClassManifest, PredictionSet


def make_manifest(n_classes=10, animal_ids=(8, 9), finegrained_ids=()):
    return ClassManifest(
        [
            ClassInfo(
                class_id=c,
                wnid=f"w{c}",
                display_name=f"class-{c}",
                is_animal=c in animal_ids,
                is_finegrained_animal=c in finegrained_ids,
            )
            for c in range(n_classes)
        ]
    )


def hierarchy_edges(n_classes=10):
    """Leaves w0..w{C-1} under two branch nodes under one root."""
    edges = [("a", "r"), ("b", "r")]
    for c in range(n_classes):
        parent = "a" if c < n_classes // 2 else "b"
        edges.append((f"w{c}", parent))
    return edges


def dense_pset(model_name, image_ids, logits, metadata=None):
    return PredictionSet.from_dense(
        model_name, list(image_ids), np.asarray(logits, dtype=float),
        metadata=metadata,
    )


@dataclass
class PipelineFixture:
    image_ids: list[str]
    n_classes: int
    manifest: ClassManifest
    edges: list[tuple[str, str]]
    original_labels: dict[str, int]
    truth: dict[str, frozenset[int]]
    predictions: list[PredictionSet]


def build_pipeline_fixture(n_images=50, n_classes=10, n_models=3, seed=7) -> PipelineFixture:
    """Planted-truth dataset where model top-1s cover every true label.

    Image mix: unanimous-agreement images whose truth is exactly the
    original label, multi-label images, images whose original label is
    wrong, and a couple of images with no valid label at all.
    """
    rng = np.random.default_rng(seed)
    images = [f"img{i:03d}" for i in range(n_images)]
    originals: dict[str, int] = {}
    truth: dict[str, frozenset[int]] = {}
    top1: dict[str, list[int]] = {}

    for i, img in enumerate(images):
        orig = int(rng.integers(n_classes))
        originals[img] = orig
        if i % 5 in (0, 1, 2):  # unanimous: all models agree with the original
            truth[img] = frozenset({orig})
            top1[img] = [orig] * n_models
        elif i % 5 == 3:  # multi-label, original still valid
            extra = [c for c in range(n_classes) if c != orig]
            picks = rng.choice(len(extra), size=int(rng.integers(1, 3)), replace=False)
            labels = sorted({orig, *(extra[p] for p in picks)})
            truth[img] = frozenset(labels)
            top1[img] = [labels[m % len(labels)] for m in range(n_models)]
        elif i % 10 == 4:  # original label wrong; models unanimous elsewhere
            other = int((orig + 1 + rng.integers(n_classes - 1)) % n_classes)
            truth[img] = frozenset({other})
            top1[img] = [other] * n_models
        else:  # nothing valid: image will be excluded
            truth[img] = frozenset()
            wrong = [(orig + 1 + m) % n_classes for m in range(n_models)]
            top1[img] = wrong

    predictions = []
    for m in range(n_models):
        logits = rng.normal(0.0, 0.1, size=(n_images, n_classes))
        for i, img in enumerate(images):
            logits[i, top1[img][m]] += 5.0
            for cls in truth[img]:
                if cls != top1[img][m]:
                    logits[i, cls] += 3.0
        predictions.append(dense_pset(f"model-{m}", images, logits))

    return PipelineFixture(
        image_ids=images,
        n_classes=n_classes,
        manifest=make_manifest(n_classes),
        edges=hierarchy_edges(n_classes),
        original_labels=originals,
        truth=truth,
        predictions=predictions,
    )


def write_fixture_files(fixture: PipelineFixture, root) -> dict:
    """Materialize a pipeline fixture as the files the CLI consumes."""
    from realabel.datamodel import (
        ReaLLabelSet,
        export_labels,
        export_predictions,
        save_class_manifest,
        save_original_labels,
    )

    root.mkdir(parents=True, exist_ok=True)
    paths = {
        "pred_dir": root / "preds",
        "originals": root / "originals.csv",
        "manifest": root / "classes.csv",
        "hierarchy": root / "hierarchy.csv",
        "truth": root / "truth.jsonl",
    }
    paths["pred_dir"].mkdir(exist_ok=True)
    for pset in fixture.predictions:
        export_predictions(pset, paths["pred_dir"] / f"{pset.model_name}.npz")
    save_original_labels(fixture.original_labels, paths["originals"])
    save_class_manifest(fixture.manifest, paths["manifest"])
    paths["hierarchy"].write_text(
        "".join(f"{c},{p}\n" for c, p in fixture.edges)
    )
    export_labels(ReaLLabelSet(dict(fixture.truth)), paths["truth"])
    return paths


@pytest.fixture
def pipeline_fixture():
    return build_pipeline_fixture()
