"""Task serving, durable answer recording, and rater simulation.

State is an immutable task file plus an append-only JSON-lines answer
log; replaying the log from empty reconstructs the service exactly, so
restarts are safe. All mutations go through a single lock.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AnswerRejected, ContractError, IngestError, UnknownIdError
from .tasking import AUDIT_CATEGORIES, AnnotationTask, KIND_LABEL, LABEL_VERDICTS


@dataclass(frozen=True)
class RaterAnswer:
    task_id: str
    rater_id: str
    verdicts: tuple[str, ...]
    ts: float

    def to_json(self) -> dict:
        return {
            "task_id": self.task_id,
            "rater_id": self.rater_id,
            "verdicts": list(self.verdicts),
            "ts": self.ts,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RaterAnswer":
        return cls(
            task_id=str(obj["task_id"]),
            rater_id=str(obj["rater_id"]),
            verdicts=tuple(str(v) for v in obj["verdicts"]),
            ts=float(obj["ts"]),
        )


def export_answers(answers: list[RaterAnswer], path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for ans in answers:
            fh.write(json.dumps(ans.to_json(), separators=(",", ":")) + "\n")


def ingest_answers(path) -> list[RaterAnswer]:
    path = Path(path)
    answers = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                answers.append(RaterAnswer.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise IngestError(
                    f"bad answer: {exc}", path=path, line=lineno
                ) from None
    return answers


class TaskService:
    """Serves tasks to raters and records their answers durably.

    Assignment is least-answered-first with task id as tiebreak; a task is
    complete once ``required_raters`` distinct raters answered. Unknown
    rater ids auto-register. When ``log_path`` is set, every answer is
    flushed and fsynced before it is acknowledged, and an existing log is
    replayed on construction.
    """

    def __init__(self, tasks: list[AnnotationTask], log_path=None, clock=time.time):
        self._tasks: dict[str, AnnotationTask] = {}
        for task in tasks:
            if task.task_id in self._tasks:
                raise ContractError(f"duplicate task id {task.task_id}")
            self._tasks[task.task_id] = task
        self._answers: dict[str, dict[str, RaterAnswer]] = {
            tid: {} for tid in self._tasks
        }
        self._lock = threading.Lock()
        self._clock = clock
        self._log_path = Path(log_path) if log_path is not None else None
        self._log_handle = None
        if self._log_path is not None:
            if self._log_path.exists():
                for ans in ingest_answers(self._log_path):
                    self._apply(ans)
            self._log_handle = self._log_path.open("a", encoding="utf-8")

    # -- internals -------------------------------------------------------

    def _validate(self, answer: RaterAnswer) -> AnnotationTask:
        task = self._tasks.get(answer.task_id)
        if task is None:
            raise UnknownIdError(f"unknown task {answer.task_id!r}")
        if len(answer.verdicts) != task.verdict_arity:
            raise AnswerRejected(
                f"task {task.task_id} expects {task.verdict_arity} verdicts, "
                f"got {len(answer.verdicts)}"
            )
        allowed = LABEL_VERDICTS if task.kind == KIND_LABEL else AUDIT_CATEGORIES
        for v in answer.verdicts:
            if v not in allowed:
                raise AnswerRejected(f"invalid verdict {v!r} for {task.kind} task")
        recorded = self._answers[task.task_id]
        if answer.rater_id in recorded:
            raise AnswerRejected(
                f"rater {answer.rater_id!r} already answered task {task.task_id}"
            )
        if len(recorded) >= task.required_raters:
            raise AnswerRejected(f"task {task.task_id} is already complete")
        return task

    def _apply(self, answer: RaterAnswer) -> None:
        self._validate(answer)
        self._answers[answer.task_id][answer.rater_id] = answer

    # -- public API -------------------------------------------------------

    def serve_next_task(self, rater_id: str) -> AnnotationTask | None:
        with self._lock:
            candidates = [
                (len(self._answers[tid]), tid)
                for tid, task in self._tasks.items()
                if len(self._answers[tid]) < task.required_raters
                and rater_id not in self._answers[tid]
            ]
            if not candidates:
                return None
            _, tid = min(candidates)
            return self._tasks[tid]

    def record_answer(self, answer: RaterAnswer) -> dict:
        """Validate, persist, then acknowledge. Raises AnswerRejected on refusal."""
        with self._lock:
            task = self._validate(answer)
            if self._log_handle is not None:
                self._log_handle.write(
                    json.dumps(answer.to_json(), separators=(",", ":")) + "\n"
                )
                self._log_handle.flush()
                os.fsync(self._log_handle.fileno())
            self._answers[answer.task_id][answer.rater_id] = answer
            return {
                "task_id": task.task_id,
                "answers": len(self._answers[task.task_id]),
                "complete": len(self._answers[task.task_id]) >= task.required_raters,
            }

    def submit(self, task_id: str, rater_id: str, verdicts) -> dict:
        answer = RaterAnswer(
            task_id=task_id,
            rater_id=rater_id,
            verdicts=tuple(verdicts),
            ts=float(self._clock()),
        )
        return self.record_answer(answer)

    def get_task(self, task_id: str) -> AnnotationTask:
        task = self._tasks.get(task_id)
        if task is None:
            raise UnknownIdError(f"unknown task {task_id!r}")
        return task

    def answers(self) -> list[RaterAnswer]:
        with self._lock:
            out = []
            for tid in self._tasks:
                out.extend(self._answers[tid].values())
            return sorted(out, key=lambda a: (a.ts, a.task_id, a.rater_id))

    def progress(self) -> dict:
        with self._lock:
            done = sum(
                1
                for tid, task in self._tasks.items()
                if len(self._answers[tid]) >= task.required_raters
            )
            return {
                "tasks": len(self._tasks),
                "complete": done,
                "answers": sum(len(a) for a in self._answers.values()),
            }

    def close(self) -> None:
        if self._log_handle is not None:
            self._log_handle.close()
            self._log_handle = None


# -- simulated raters --------------------------------------------------------


@dataclass(frozen=True)
class SimulatedRaterProfile:
    """Categorical answer model of one synthetic rater.

    Answer distributions are (yes, maybe, no) per true state; the ``no``
    rate is implied. ``finegrained_modifier`` shifts mass toward ``maybe``
    on fine-grained animal classes. ``audit_rates`` maps a true audit
    category to its (clear-mistake, not-a-mistake, undecidable) answer
    distribution; None answers audits truthfully.
    """

    rater_id: str
    p_yes_present: float = 0.95
    p_maybe_present: float = 0.03
    p_yes_absent: float = 0.03
    p_maybe_absent: float = 0.05
    finegrained_modifier: float = 0.0
    audit_rates: dict[str, tuple[float, float, float]] | None = None
    seed: int = 0

    def __post_init__(self):
        for yes, maybe in (
            (self.p_yes_present, self.p_maybe_present),
            (self.p_yes_absent, self.p_maybe_absent),
        ):
            if yes < 0 or maybe < 0 or yes + maybe > 1.0 + 1e-12:
                raise ContractError("answer probabilities must form a distribution")
        if not 0.0 <= self.finegrained_modifier <= 1.0:
            raise ContractError("finegrained_modifier must be in [0, 1]")
        if self.audit_rates is not None:
            for cat, dist in self.audit_rates.items():
                if cat not in AUDIT_CATEGORIES:
                    raise ContractError(f"unknown audit category {cat!r}")
                if len(dist) != 3 or abs(sum(dist) - 1.0) > 1e-9 or min(dist) < 0:
                    raise ContractError("audit rates must form a distribution")

    def verdict_distribution(self, present: bool, finegrained: bool) -> np.ndarray:
        if present:
            dist = np.array(
                [
                    self.p_yes_present,
                    self.p_maybe_present,
                    1.0 - self.p_yes_present - self.p_maybe_present,
                ]
            )
        else:
            dist = np.array(
                [
                    self.p_yes_absent,
                    self.p_maybe_absent,
                    1.0 - self.p_yes_absent - self.p_maybe_absent,
                ]
            )
        if finegrained and self.finegrained_modifier > 0:
            maybe = np.array([0.0, 1.0, 0.0])
            dist = (1 - self.finegrained_modifier) * dist + self.finegrained_modifier * maybe
        return dist

    @classmethod
    def from_json(cls, obj: dict) -> "SimulatedRaterProfile":
        audit = obj.get("audit_rates")
        if audit is not None:
            audit = {k: tuple(v) for k, v in audit.items()}
        return cls(
            rater_id=str(obj["rater_id"]),
            p_yes_present=float(obj.get("p_yes_present", 0.95)),
            p_maybe_present=float(obj.get("p_maybe_present", 0.03)),
            p_yes_absent=float(obj.get("p_yes_absent", 0.03)),
            p_maybe_absent=float(obj.get("p_maybe_absent", 0.05)),
            finegrained_modifier=float(obj.get("finegrained_modifier", 0.0)),
            audit_rates=audit,
            seed=int(obj.get("seed", 0)),
        )


def load_profiles(path) -> list[SimulatedRaterProfile]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        data = json.load(fh)
    return [SimulatedRaterProfile.from_json(obj) for obj in data]


def _truth_lookup(truth) -> dict[str, frozenset[int]]:
    if hasattr(truth, "labels"):
        return dict(truth.labels)
    return {img: frozenset(s) for img, s in truth.items()}


def noiseless_profiles(count: int, prefix: str = "sim") -> list[SimulatedRaterProfile]:
    """Raters that reproduce the planted truth exactly."""
    return [
        SimulatedRaterProfile(
            rater_id=f"{prefix}{i}",
            p_yes_present=1.0,
            p_maybe_present=0.0,
            p_yes_absent=0.0,
            p_maybe_absent=0.0,
            seed=i,
        )
        for i in range(count)
    ]


def simulate_raters(
    tasks: list[AnnotationTask],
    truth,
    profiles: list[SimulatedRaterProfile],
    *,
    manifest=None,
    log_path=None,
) -> list[RaterAnswer]:
    """Drive simulated raters through the service until no tasks remain.

    ``truth`` is a ReaLLabelSet or a plain image -> label-set mapping; every
    task image must appear in it. Deterministic for fixed profile seeds:
    timestamps are a counter, not wall-clock time.
    """
    truth_map = _truth_lookup(truth)
    missing = {t.image_id for t in tasks} - truth_map.keys()
    if missing:
        raise ContractError(
            f"no ground truth for image {sorted(missing)[0]!r} "
            f"({len(missing)} missing)"
        )
    finegrained = (
        manifest.finegrained_animal_classes() if manifest is not None else frozenset()
    )
    counter = iter(range(10**12))
    service = TaskService(tasks, log_path=log_path, clock=lambda: next(counter))
    rngs = {p.rater_id: np.random.default_rng(p.seed) for p in profiles}
    verdict_values = list(LABEL_VERDICTS)

    active = list(profiles)
    while active:
        still = []
        for profile in active:
            task = service.serve_next_task(profile.rater_id)
            if task is None:
                continue
            rng = rngs[profile.rater_id]
            if task.kind == KIND_LABEL:
                verdicts = []
                for option in task.options:
                    present = option in truth_map[task.image_id]
                    dist = profile.verdict_distribution(
                        present, option in finegrained
                    )
                    verdicts.append(verdict_values[rng.choice(3, p=dist)])
            else:
                true_cat = (
                    "not-a-mistake"
                    if task.audit.predicted in truth_map[task.image_id]
                    else "clear-mistake"
                )
                if profile.audit_rates is None:
                    verdicts = [true_cat]
                else:
                    dist = np.asarray(profile.audit_rates[true_cat])
                    verdicts = [AUDIT_CATEGORIES[rng.choice(3, p=dist)]]
            service.submit(task.task_id, profile.rater_id, verdicts)
            still.append(profile)
        active = still

    answers = service.answers()
    service.close()
    return answers
