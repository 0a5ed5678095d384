"""Rater-model aggregation: EM confusion inference, majority baseline,
precision/recall sweep, and operating-point label finalization.

The latent state of each (image, label) item is binary (present/absent);
answers are the three categories yes/maybe/no. EM alternates a posterior
pass over items and a re-estimation of per-rater 2x3 confusion matrices
plus the class prior. Smoothing pseudo-counts make the M-step a MAP
update, so the reported objective (penalized log-likelihood) is
non-decreasing by construction; with smoothing 0 it is the exact data
log-likelihood.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .annotation import RaterAnswer
from .datamodel import ReaLLabelSet
from .errors import ContractError, UnknownIdError
from .tasking import AnnotationTask, KIND_LABEL

ANSWER_INDEX = {"yes": 0, "maybe": 1, "no": 2}
VIRTUAL_RATER_ID = "__original_label__"

# Likelihood of the virtual (original-label) rater answering yes given the
# true state. Only the yes column matters since it never answers otherwise;
# estimated parameters would be degenerate, so it is pinned, not fit.
DEFAULT_VIRTUAL_CONFUSION = (
    (0.95, 0.03, 0.02),  # present
    (0.30, 0.30, 0.40),  # absent
)


Item = tuple[str, int]


@dataclass
class ItemResponses:
    """Flattened per-item categorical answers."""

    items: tuple[Item, ...]
    raters: tuple[str, ...]
    item_idx: np.ndarray  # (n_responses,)
    rater_idx: np.ndarray  # (n_responses,)
    answer: np.ndarray  # (n_responses,) values in 0..2


def flatten_answers(
    tasks: list[AnnotationTask],
    answers: list[RaterAnswer],
    items: list[Item] | None = None,
) -> ItemResponses:
    """Expand per-task verdict vectors into per-(image,label) responses."""
    label_tasks = {t.task_id: t for t in tasks if t.kind == KIND_LABEL}
    derived: list[Item] = []
    seen = set()
    for task in tasks:
        if task.kind != KIND_LABEL:
            continue
        for option in task.options:
            item = (task.image_id, option)
            if item in seen:
                raise ContractError(
                    f"item {item} appears in more than one task"
                )
            seen.add(item)
            derived.append(item)
    if items is None:
        items = derived
    else:
        unknown = set(derived) - set(items)
        if unknown:
            raise UnknownIdError(
                f"task item {sorted(unknown)[0]} is outside the item universe"
            )
    item_pos = {item: i for i, item in enumerate(items)}

    rater_ids = sorted({a.rater_id for a in answers})
    rater_pos = {r: i for i, r in enumerate(rater_ids)}
    ii, rr, aa = [], [], []
    for ans in answers:
        task = label_tasks.get(ans.task_id)
        if task is None:
            continue
        if len(ans.verdicts) != len(task.options):
            raise ContractError(
                f"answer arity mismatch on task {ans.task_id}"
            )
        for option, verdict in zip(task.options, ans.verdicts):
            ii.append(item_pos[(task.image_id, option)])
            rr.append(rater_pos[ans.rater_id])
            aa.append(ANSWER_INDEX[verdict])
    return ItemResponses(
        items=tuple(items),
        raters=tuple(rater_ids),
        item_idx=np.array(ii, dtype=np.int64),
        rater_idx=np.array(rr, dtype=np.int64),
        answer=np.array(aa, dtype=np.int64),
    )


@dataclass
class RaterModel:
    """EM-estimated rater confusions, class prior, and item posteriors."""

    raters: tuple[str, ...]
    confusion: dict[str, np.ndarray]  # rater -> (2, 3) row-stochastic
    prior: float
    items: tuple[Item, ...]
    posteriors: np.ndarray  # (n_items,) P(present | answers)
    objective_trace: list[float] = field(default_factory=list)
    data_log_likelihood: float = 0.0
    n_iter: int = 0
    converged: bool = True
    warning: str | None = None
    _posterior_index: dict[Item, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._posterior_index:
            self._posterior_index = {item: i for i, item in enumerate(self.items)}

    def posterior(self, image_id: str, class_id: int) -> float:
        try:
            return float(self.posteriors[self._posterior_index[(image_id, class_id)]])
        except KeyError:
            raise UnknownIdError(
                f"item ({image_id!r}, {class_id}) not in model"
            ) from None

    def accepted(self, tau: float) -> set[Item]:
        mask = self.posteriors >= tau
        return {self.items[i] for i in np.nonzero(mask)[0]}

    def to_report(self) -> dict:
        return {
            "prior": self.prior,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "warning": self.warning,
            "data_log_likelihood": self.data_log_likelihood,
            "objective_trace": self.objective_trace,
            "raters": {
                r: self.confusion[r].tolist() for r in self.raters
            },
        }


def _inject_virtual_rater(
    responses: ItemResponses,
    original_labels: dict[str, int],
    manifest,
) -> ItemResponses:
    """Add a yes answer on every animal image's original-label item."""
    if original_labels is None or manifest is None:
        raise ContractError(
            "virtual rater needs original labels and a class manifest"
        )
    animals = manifest.animal_classes()
    extra = [
        i
        for i, (img, cls) in enumerate(responses.items)
        if original_labels.get(img) == cls and cls in animals
    ]
    if not extra:
        return responses
    if VIRTUAL_RATER_ID in responses.raters:
        raise ContractError(f"rater id {VIRTUAL_RATER_ID!r} is reserved")
    raters = responses.raters + (VIRTUAL_RATER_ID,)
    v = len(responses.raters)
    return ItemResponses(
        items=responses.items,
        raters=raters,
        item_idx=np.concatenate([responses.item_idx, np.array(extra, dtype=np.int64)]),
        rater_idx=np.concatenate(
            [responses.rater_idx, np.full(len(extra), v, dtype=np.int64)]
        ),
        answer=np.concatenate(
            [responses.answer, np.zeros(len(extra), dtype=np.int64)]
        ),
    )


def run_dawid_skene(
    answers: list[RaterAnswer],
    tasks: list[AnnotationTask],
    *,
    items: list[Item] | None = None,
    virtual_rater: bool = False,
    original_labels: dict[str, int] | None = None,
    manifest=None,
    tol: float = 1e-6,
    max_iter: int = 500,
    smoothing: float = 1e-9,
    virtual_confusion=DEFAULT_VIRTUAL_CONFUSION,
) -> RaterModel:
    """Fit the rater model by EM, initialized from majority vote.

    Every item needs at least one answer. The virtual rater, when enabled,
    answers yes on (image, original-label) items of animal-class images and
    abstains elsewhere; its confusion matrix is pinned to
    ``virtual_confusion`` and excluded from the M-step.

    ``smoothing`` adds Dirichlet pseudo-counts in the M-step. The default
    is just large enough to keep degenerate confusion cells off exact zero
    without biasing estimates; larger values regularize under-identified
    answer sets but pull posteriors toward the interior.
    """
    responses = flatten_answers(tasks, answers, items)
    if virtual_rater:
        responses = _inject_virtual_rater(responses, original_labels, manifest)

    n_items = len(responses.items)
    n_raters = len(responses.raters)
    if n_items == 0:
        raise ContractError("no items to aggregate")
    answered = np.zeros(n_items, dtype=bool)
    answered[responses.item_idx] = True
    if not answered.all():
        missing = responses.items[int(np.nonzero(~answered)[0][0])]
        raise ContractError(f"item {missing} has no answers")

    ii, rr, aa = responses.item_idx, responses.rater_idx, responses.answer
    pinned = np.zeros(n_raters, dtype=bool)
    if virtual_rater and VIRTUAL_RATER_ID in responses.raters:
        pinned[responses.raters.index(VIRTUAL_RATER_ID)] = True

    # Majority-vote initialization anchors the present/absent orientation.
    yes_counts = np.bincount(ii, weights=(aa == 0).astype(float), minlength=n_items)
    totals = np.bincount(ii, minlength=n_items).astype(float)
    q = yes_counts / totals

    theta = np.empty((n_raters, 2, 3))
    prior = 0.5
    alpha = float(smoothing)
    if alpha < 0:
        raise ContractError("smoothing must be >= 0")
    v_matrix = np.asarray(virtual_confusion, dtype=np.float64)

    def m_step(q):
        counts = np.zeros((n_raters, 2, 3))
        np.add.at(counts, (rr, 0, aa), q[ii])
        np.add.at(counts, (rr, 1, aa), 1.0 - q[ii])
        new_theta = counts + alpha
        new_theta /= new_theta.sum(axis=2, keepdims=True)
        if pinned.any():
            new_theta[pinned] = v_matrix
        new_prior = (q.sum() + alpha) / (n_items + 2 * alpha)
        return new_theta, new_prior

    def e_step(theta, prior):
        log_theta = np.log(theta)
        lp = np.zeros(n_items)
        la = np.zeros(n_items)
        np.add.at(lp, ii, log_theta[rr, 0, aa])
        np.add.at(la, ii, log_theta[rr, 1, aa])
        lp = lp + np.log(prior)
        la = la + np.log1p(-prior)
        norm = np.logaddexp(lp, la)
        return np.exp(lp - norm), float(norm.sum())

    def penalty(theta, prior):
        if alpha == 0:
            return 0.0
        free = np.log(theta[~pinned]).sum() if (~pinned).any() else 0.0
        return alpha * free + alpha * (np.log(prior) + np.log1p(-prior))

    trace: list[float] = []
    data_ll = -np.inf
    converged = False
    for iteration in range(1, max_iter + 1):
        new_theta, new_prior = m_step(q)
        q, data_ll = e_step(new_theta, new_prior)
        objective = data_ll + penalty(new_theta, new_prior)
        if trace and objective < trace[-1] - 1e-9:
            raise AssertionError(
                f"EM objective decreased at iteration {iteration}: "
                f"{trace[-1]} -> {objective}"
            )
        trace.append(objective)
        delta = 0.0 if iteration == 1 else max(
            float(np.max(np.abs(new_theta - theta))), abs(new_prior - prior)
        )
        theta, prior = new_theta, new_prior
        if iteration > 1 and delta < tol:
            converged = True
            break

    warning = None
    if not converged:
        warning = f"EM did not converge within {max_iter} iterations"
        warnings.warn(warning, RuntimeWarning, stacklevel=2)

    rows = np.abs(theta.sum(axis=2) - 1.0)
    if np.any(rows > 1e-9):
        raise AssertionError("confusion matrix rows are not stochastic")
    if not 0.0 < prior < 1.0:
        raise AssertionError("prior left (0, 1)")

    return RaterModel(
        raters=responses.raters,
        confusion={r: theta[i].copy() for i, r in enumerate(responses.raters)},
        prior=float(prior),
        items=responses.items,
        posteriors=q,
        objective_trace=trace,
        data_log_likelihood=float(data_ll),
        n_iter=len(trace),
        converged=converged,
        warning=warning,
    )


def majority_vote(
    answers: list[RaterAnswer],
    tasks: list[AnnotationTask],
    items: list[Item] | None = None,
) -> set[Item]:
    """Items accepted by a strict majority of yes answers; ties reject."""
    responses = flatten_answers(tasks, answers, items)
    n_items = len(responses.items)
    yes = np.bincount(
        responses.item_idx,
        weights=(responses.answer == 0).astype(float),
        minlength=n_items,
    )
    totals = np.bincount(responses.item_idx, minlength=n_items).astype(float)
    accepted = yes * 2 > totals
    return {responses.items[i] for i in np.nonzero(accepted)[0]}


def precision_recall_curve(
    model: RaterModel,
    gold,
    thresholds=None,
) -> list[tuple[float, float, float]]:
    """(tau, precision, recall) against gold pairs, sorted by tau.

    Precision of an empty acceptance set is 1.0 by convention. Items and
    gold pairs are both restricted to gold-standard images.
    """
    gold_pairs = gold.pairs()
    if not gold_pairs:
        raise ContractError("gold standard is empty")
    gold_images = set(gold.labels)
    idx = [i for i, (img, _) in enumerate(model.items) if img in gold_images]
    post = model.posteriors[idx]
    pairs = [model.items[i] for i in idx]
    hits = np.array([p in gold_pairs for p in pairs], dtype=bool)

    if thresholds is None:
        thresholds = np.unique(
            np.concatenate([[0.0], model.posteriors, [np.nextafter(1.0, 2.0)]])
        )
    curve = []
    for tau in sorted(float(t) for t in thresholds):
        accept = post >= tau
        n_accept = int(accept.sum())
        n_hits = int((accept & hits).sum())
        precision = n_hits / n_accept if n_accept else 1.0
        recall = n_hits / len(gold_pairs)
        curve.append((tau, precision, recall))
    return curve


def choose_operating_point(
    curve: list[tuple[float, float, float]], min_precision: float = 0.95
) -> float:
    """Smallest threshold whose gold precision meets the target."""
    for tau, precision, _ in curve:
        if precision >= min_precision:
            return tau
    best = max(p for _, p, _ in curve)
    raise ContractError(
        f"no threshold reaches precision {min_precision:.3f}; best is {best:.3f}"
    )


def finalize_labels(
    model: RaterModel,
    tau: float,
    unanimous_skips: dict[str, int] | None = None,
) -> ReaLLabelSet:
    """Merge accepted items with unanimity skips into the final label sets."""
    if not 0.0 <= tau <= 1.0:
        raise ContractError("tau must be in [0, 1]")
    unanimous_skips = unanimous_skips or {}
    result: dict[str, set[int]] = {img: set() for img, _ in model.items}
    for (img, cls), post in zip(model.items, model.posteriors):
        if post >= tau:
            result[img].add(cls)
    for img, cls in unanimous_skips.items():
        result.setdefault(img, set()).add(cls)
    return ReaLLabelSet({img: frozenset(s) for img, s in result.items()})
