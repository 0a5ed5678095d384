"""Training-side remedies: fold-based label cleaning and multi-label losses."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .datamodel import PredictionSet
from .errors import ContractError, LeakageError, UnknownIdError


@dataclass(frozen=True)
class FoldAssignment:
    """Image -> fold index map, balanced to within one image per fold."""

    assignment: dict[str, int]
    n_folds: int
    seed: int

    def fold_of(self, image_id: str) -> int:
        try:
            return self.assignment[image_id]
        except KeyError:
            raise UnknownIdError(f"image {image_id!r} has no fold") from None

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.n_folds
        for f in self.assignment.values():
            sizes[f] += 1
        return sizes


@dataclass(frozen=True)
class LossValue:
    loss: float
    gradient: np.ndarray


def assign_folds(image_ids, n_folds: int = 10, seed: int = 0) -> FoldAssignment:
    """Seeded shuffle then round-robin; deterministic and balanced."""
    ids = sorted(image_ids)
    if len(set(ids)) != len(ids):
        raise ContractError("duplicate image ids")
    if n_folds < 2:
        raise ContractError("need at least 2 folds")
    if n_folds > len(ids):
        raise ContractError(
            f"cannot split {len(ids)} images into {n_folds} folds"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    assignment = {ids[order[i]]: i % n_folds for i in range(len(ids))}
    result = FoldAssignment(assignment=assignment, n_folds=n_folds, seed=seed)
    sizes = result.fold_sizes()
    assert max(sizes) - min(sizes) <= 1
    return result


def _trained_folds(pset: PredictionSet) -> set[int]:
    raw = pset.metadata.get("trained_on_folds")
    if raw is None:
        raise ContractError(
            f"prediction set {pset.model_name!r} lacks trained_on_folds provenance"
        )
    if isinstance(raw, str):
        raw = json.loads(raw)
    return {int(f) for f in raw}


def clean_dataset(
    fold_predictions: dict[int, PredictionSet],
    original_labels: dict[str, int],
    folds: FoldAssignment,
    *,
    min_prob: float | None = None,
) -> tuple[set[str], set[str]]:
    """Partition images into (retained, removed) by held-out agreement.

    An image is retained when the prediction set assigned to its fold has
    that image's original label as top-1; with ``min_prob`` set, when it
    gives the label at least that probability. Every fold's prediction set
    must declare its training folds and must not have trained on the fold
    it predicts (leakage guard).
    """
    for fold, pset in fold_predictions.items():
        if fold in _trained_folds(pset):
            raise LeakageError(
                f"prediction set {pset.model_name!r} for fold {fold} was "
                f"trained on that fold"
            )
    retained: set[str] = set()
    removed: set[str] = set()
    for img, cls in original_labels.items():
        fold = folds.fold_of(img)
        if fold not in fold_predictions:
            raise ContractError(f"no prediction set for fold {fold}")
        pset = fold_predictions[fold]
        if img not in pset:
            raise UnknownIdError(
                f"image {img!r} missing from fold {fold} predictions"
            )
        if min_prob is None:
            keep = pset.top1(img) == cls
        else:
            cids, _, probs = pset.entries(img)
            pos = np.nonzero(cids == cls)[0]
            keep = len(pos) > 0 and float(probs[pos[0]]) >= min_prob
        (retained if keep else removed).add(img)
    return retained, removed


def softmax_ce(logits, target: int) -> LossValue:
    """Cross entropy with mutually exclusive classes, stable via log-sum-exp."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 1 or not np.all(np.isfinite(z)):
        raise ContractError("logits must be a finite vector")
    if not 0 <= target < len(z):
        raise ContractError(f"target {target} out of range for {len(z)} classes")
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    probs = np.exp(z - lse)
    grad = probs.copy()
    grad[target] -= 1.0
    return LossValue(loss=float(lse - z[target]), gradient=grad)


def sigmoid_bce(logits, targets) -> LossValue:
    """Independent per-class binary cross entropy on logits.

    loss = sum_c softplus(z_c) - t_c * z_c, gradient_c = sigmoid(z_c) - t_c.
    """
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if z.ndim != 1 or not np.all(np.isfinite(z)):
        raise ContractError("logits must be a finite vector")
    if t.shape != z.shape:
        raise ContractError("targets must match logits in length")
    if not np.all((t == 0.0) | (t == 1.0)):
        raise ContractError("targets must be binary")
    softplus = np.logaddexp(0.0, z)
    loss = float((softplus - t * z).sum())
    sigmoid = np.where(z >= 0, 1.0 / (1.0 + np.exp(-z)), np.exp(z) / (1.0 + np.exp(z)))
    return LossValue(loss=loss, gradient=sigmoid - t)
