"""Set-based accuracy metrics, preference analysis, logit ensembling, and
the two-segment regression comparison with its slope Z-test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .datamodel import PredictionSet, ReaLLabelSet
from .errors import ContractError, UnknownIdError


@dataclass(frozen=True)
class AccuracyReport:
    model_name: str
    original_top1: float
    real_top1: float
    real_top2: float
    real_top3: float
    evaluated_image_count: int


@dataclass(frozen=True)
class HalfFit:
    slope: float
    intercept: float
    slope_std_error: float
    n: int


@dataclass(frozen=True)
class RegressionResult:
    first: HalfFit
    second: HalfFit
    z_statistic: float
    p_value: float


def real_accuracy(
    predictions: PredictionSet, labels: ReaLLabelSet, k: int = 1
) -> float:
    """Fraction of non-excluded images whose k-th prediction is in the set.

    k=1 scores the top prediction; k=2 and 3 score the second and third
    predictions alone. Ranking ties break toward the lower class id.
    """
    if k < 1:
        raise ContractError("k must be >= 1")
    images = labels.non_excluded()
    if not images:
        raise ContractError("label set has no non-excluded images")
    hits = 0
    for img in images:
        if img not in predictions:
            raise UnknownIdError(
                f"image {img!r} missing from predictions {predictions.model_name!r}"
            )
        if predictions.kth_prediction(img, k) in labels[img]:
            hits += 1
    return hits / len(images)


def original_accuracy(
    predictions: PredictionSet, original_labels: dict[str, int]
) -> float:
    """Standard top-1 exact-match accuracy over every labeled image."""
    if not original_labels:
        raise ContractError("original labels are empty")
    hits = 0
    for img, cls in original_labels.items():
        if img not in predictions:
            raise UnknownIdError(
                f"image {img!r} missing from predictions {predictions.model_name!r}"
            )
        if predictions.top1(img) == cls:
            hits += 1
    return hits / len(original_labels)


def accuracy_report(
    predictions: PredictionSet,
    labels: ReaLLabelSet,
    original_labels: dict[str, int],
) -> AccuracyReport:
    return AccuracyReport(
        model_name=predictions.model_name,
        original_top1=original_accuracy(predictions, original_labels),
        real_top1=real_accuracy(predictions, labels, 1),
        real_top2=real_accuracy(predictions, labels, 2),
        real_top3=real_accuracy(predictions, labels, 3),
        evaluated_image_count=len(labels.non_excluded()),
    )


def preference_rate(
    predictions: PredictionSet,
    original_labels: dict[str, int],
    labels: ReaLLabelSet,
) -> tuple[float, int]:
    """How often the model beats the original label where exactly one is right.

    Considers non-excluded images where the model's top-1 differs from the
    original label and the label set contains exactly one of the two.
    Returns (win rate, number of discriminating images).
    """
    wins = 0
    n = 0
    for img in labels.non_excluded():
        if img not in original_labels:
            raise UnknownIdError(f"image {img!r} has no original label")
        pred = predictions.top1(img)
        orig = original_labels[img]
        if pred == orig:
            continue
        in_set = labels[img]
        pred_ok = pred in in_set
        orig_ok = orig in in_set
        if pred_ok == orig_ok:
            continue
        n += 1
        if pred_ok:
            wins += 1
    if n == 0:
        raise ContractError("no discriminating images")
    return wins / n, n


def ensemble_logits(
    predictions: list[PredictionSet], weights: list[float] | None = None
) -> PredictionSet:
    """Weighted logit sum across models; probabilities re-derived by softmax.

    All inputs must be dense and cover identical image and class spaces.
    Argmax ties resolve to the lower class id.
    """
    if not predictions:
        raise ContractError("ensemble needs at least one model")
    if weights is None:
        weights = [1.0] * len(predictions)
    if len(weights) != len(predictions):
        raise ContractError("one weight per model required")
    base = predictions[0]
    for pset in predictions:
        if not pset.is_dense:
            raise ContractError(
                f"prediction set {pset.model_name!r} is sparse; ensembling "
                "needs dense logits (export a dense .npz first)"
            )
        if set(pset.image_ids) != set(base.image_ids):
            raise ContractError("ensemble inputs cover different images")
        if pset.n_classes != base.n_classes:
            raise ContractError("ensemble inputs cover different class spaces")
    total = np.zeros((len(base.image_ids), base.n_classes))
    for w, pset in zip(weights, predictions):
        lg, _ = pset.to_dense()
        if pset.image_ids != base.image_ids:
            order = [pset.image_index(img) for img in base.image_ids]
            lg = lg[order]
        total += w * lg
    name = "+".join(p.model_name for p in predictions)
    return PredictionSet.from_dense(
        f"ensemble({name})", list(base.image_ids), total,
        metadata={"members": ",".join(p.model_name for p in predictions)},
    )


def _ols(x: np.ndarray, y: np.ndarray) -> HalfFit:
    n = len(x)
    if n < 3:
        raise ContractError(f"need at least 3 points per half, got {n}")
    xb, yb = x.mean(), y.mean()
    sxx = float(((x - xb) ** 2).sum())
    if sxx <= 0:
        raise ContractError("degenerate regression: no variance in x")
    slope = float(((x - xb) * (y - yb)).sum() / sxx)
    intercept = float(yb - slope * xb)
    resid = y - (intercept + slope * x)
    sigma2 = float((resid**2).sum() / (n - 2))
    return HalfFit(slope, intercept, float(np.sqrt(sigma2 / sxx)), n)


def split_regression(points: list[tuple[float, float]]) -> RegressionResult:
    """Fit both halves of (original, set-based) accuracy points by OLS.

    Points are ordered by original accuracy (ties by the response value);
    the lower half is the first fit. The Z statistic compares the two
    slopes assuming independent normal errors.
    """
    if len(points) < 6:
        raise ContractError("need at least 6 points (3 per half)")
    ordered = sorted(points)
    xs = np.array([p[0] for p in ordered], dtype=np.float64)
    ys = np.array([p[1] for p in ordered], dtype=np.float64)
    half = len(ordered) // 2
    first = _ols(xs[:half], ys[:half])
    second = _ols(xs[half:], ys[half:])
    diff = first.slope - second.slope
    denom = float(np.hypot(first.slope_std_error, second.slope_std_error))
    # Exact-line inputs leave only rounding noise in the residuals; the
    # ratio of two such noise terms is meaningless, so call it a perfect
    # non-difference (or an infinite one if the slopes genuinely differ).
    scale = max(1.0, abs(first.slope), abs(second.slope))
    if denom <= 1e-9 * scale:
        z = 0.0 if abs(diff) <= 1e-9 * scale else float(np.copysign(np.inf, diff))
    else:
        z = diff / denom
    p = float(2.0 * stats.norm.sf(abs(z)))
    return RegressionResult(first=first, second=second, z_statistic=z, p_value=p)
