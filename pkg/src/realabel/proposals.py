"""Label proposal generation from model ensembles and subset selection.

Pooling rule: per model, the globally largest K logit pairs and K
probability pairs form two channels; pooled pairs brought up by fewer
than two channel occurrences are dropped; every model's per-image top-1
and the original label are then added unconditionally.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .datamodel import (
    PredictionSet,
    ProposalSet,
    TAG_ORIGINAL,
    tag_logit_pool,
    tag_prob_pool,
    tag_top1,
)
from .errors import ContractError, SubsetSearchError, UnknownIdError


@dataclass(frozen=True)
class PoolingConfig:
    """Channel sizes and the pooling survival rule.

    ``min_pool_occurrences`` is the number of (model, channel) occurrences
    a pooled pair needs to survive; 2 drops pairs brought up a single time
    by a single model. ``global_pool`` switches the top-K cutoffs from
    per-model to one shared pool across models.
    """

    top_logit_count: int = 150_000
    top_prob_count: int = 150_000
    min_pool_occurrences: int = 2
    global_pool: bool = False

    def __post_init__(self):
        if self.top_logit_count <= 0 or self.top_prob_count <= 0:
            raise ContractError("pool sizes must be positive")
        if self.min_pool_occurrences < 1:
            raise ContractError("min_pool_occurrences must be >= 1")


@dataclass(frozen=True)
class SubsetSearchResult:
    selected_models: tuple[str, ...]
    precision: float
    recall: float
    mean_proposals_per_image: float


def _validate_inputs(predictions: list[PredictionSet], original_labels: dict[str, int]):
    if not predictions:
        raise ContractError("at least one prediction set is required")
    names = [p.model_name for p in predictions]
    if len(set(names)) != len(names):
        raise ContractError("duplicate model names in prediction list")
    base = set(predictions[0].image_ids)
    for pset in predictions[1:]:
        if set(pset.image_ids) != base:
            raise ContractError(
                f"prediction sets cover different images "
                f"({predictions[0].model_name!r} vs {pset.model_name!r})"
            )
    missing = base - original_labels.keys()
    if missing:
        raise UnknownIdError(
            f"no original label for image {sorted(missing)[0]!r} "
            f"({len(missing)} missing)"
        )


def _channel_pairs(pset: PredictionSet, scores: np.ndarray, k: int) -> list[tuple[str, int]]:
    """Top-k (image, class) pairs by score; ties to lower image index, class id."""
    img_idx = np.repeat(
        np.arange(len(pset.image_ids), dtype=np.int64), np.diff(pset.indptr)
    )
    order = np.lexsort((pset.class_ids, img_idx, -scores))
    top = order[: min(k, len(order))]
    ids = pset.image_ids
    return [(ids[img_idx[j]], int(pset.class_ids[j])) for j in top]


def generate_proposals(
    predictions: list[PredictionSet],
    original_labels: dict[str, int],
    config: PoolingConfig | None = None,
) -> ProposalSet:
    """Apply the pooling rule and return per-image proposals with provenance."""
    config = config or PoolingConfig()
    _validate_inputs(predictions, original_labels)
    ordered = sorted(predictions, key=lambda p: p.model_name)

    counts: Counter[tuple[str, int]] = Counter()
    channel_tags: dict[tuple[str, int], set[str]] = {}

    def add_channel(pairs, tag):
        for pair in pairs:
            counts[pair] += 1
            channel_tags.setdefault(pair, set()).add(tag)

    if config.global_pool:
        logit_rows = []
        prob_rows = []
        for pset in ordered:
            img_idx = np.repeat(
                np.arange(len(pset.image_ids), dtype=np.int64), np.diff(pset.indptr)
            )
            for j in range(len(pset.class_ids)):
                img = pset.image_ids[img_idx[j]]
                cid = int(pset.class_ids[j])
                key = (pset.model_name, int(img_idx[j]), cid, img)
                logit_rows.append((-float(pset.logits[j]), key))
                prob_rows.append((-float(pset.probs[j]), key))
        for rows, k, tagger in (
            (logit_rows, config.top_logit_count, tag_logit_pool),
            (prob_rows, config.top_prob_count, tag_prob_pool),
        ):
            rows.sort(key=lambda r: (r[0], r[1][0], r[1][1], r[1][2]))
            for _, (model, _, cid, img) in rows[:k]:
                counts[(img, cid)] += 1
                channel_tags.setdefault((img, cid), set()).add(tagger(model))
    else:
        for pset in ordered:
            add_channel(
                _channel_pairs(pset, pset.logits, config.top_logit_count),
                tag_logit_pool(pset.model_name),
            )
            add_channel(
                _channel_pairs(pset, pset.probs, config.top_prob_count),
                tag_prob_pool(pset.model_name),
            )

    result: dict[str, dict[int, set[str]]] = {
        img: {} for img in sorted(set(ordered[0].image_ids))
    }

    for (img, cid), n in counts.items():
        if n >= config.min_pool_occurrences:
            result[img][cid] = set(channel_tags[(img, cid)])

    for pset in ordered:
        tag = tag_top1(pset.model_name)
        for img in pset.image_ids:
            cid = pset.top1(img)
            result[img].setdefault(cid, set()).add(tag)

    for img in result:
        result[img].setdefault(original_labels[img], set()).add(TAG_ORIGINAL)

    return ProposalSet(
        {img: {c: frozenset(t) for c, t in m.items()} for img, m in result.items()}
    )


def score_proposals(proposals: ProposalSet, gold) -> tuple[float, float]:
    """Pair-level (precision, recall) of proposals against the gold standard."""
    gold_pairs = gold.pairs()
    if not gold_pairs:
        raise ContractError("gold standard is empty")
    gold_images = set(gold.labels)
    proposal_images = set(proposals.proposals)
    missing = gold_images - proposal_images
    if missing:
        raise UnknownIdError(
            f"gold image {sorted(missing)[0]!r} has no proposals "
            f"({len(missing)} missing)"
        )
    proposed = {
        (img, c) for img, m in proposals.proposals.items() if img in gold_images
        for c in m
    }
    hits = len(proposed & gold_pairs)
    return hits / len(proposed), hits / len(gold_pairs)


def select_subset(
    predictions: list[PredictionSet],
    original_labels: dict[str, int],
    gold,
    recall_floor: float = 0.97,
    config: PoolingConfig | None = None,
    *,
    threads: int = 1,
) -> SubsetSearchResult:
    """Exhaustively search model subsets for maximal precision at the floor.

    Every non-empty subset regenerates proposals with the full pooling
    rule. Among subsets with recall >= the floor, the winner has maximal
    precision; ties break toward higher recall, fewer models, then
    lexicographic model names.
    """
    if not gold.labels:
        raise ContractError("gold standard is empty")
    if len(predictions) > 25:
        raise ContractError(
            "exhaustive search is limited to 25 models; reduce the pool"
        )
    _validate_inputs(predictions, original_labels)
    config = config or PoolingConfig()
    by_name = sorted(predictions, key=lambda p: p.model_name)
    n = len(by_name)

    def evaluate(mask: int):
        subset = [by_name[i] for i in range(n) if mask >> i & 1]
        props = generate_proposals(subset, original_labels, config)
        precision, recall = score_proposals(props, gold)
        names = tuple(p.model_name for p in subset)
        return SubsetSearchResult(
            names, precision, recall, props.mean_proposals_per_image()
        )

    masks = range(1, 1 << n)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate, masks))
    else:
        results = [evaluate(m) for m in masks]

    eligible = [r for r in results if r.recall >= recall_floor - 1e-12]
    if not eligible:
        best = max(r.recall for r in results)
        raise SubsetSearchError(recall_floor, best)
    return min(
        eligible,
        key=lambda r: (
            -r.precision,
            -r.recall,
            len(r.selected_models),
            r.selected_models,
        ),
    )
