"""Core domain types and file ingestion/persistence.

Identifier conventions: images are opaque string ids mapped to a dense
0..N-1 index at ingestion; classes are integers 0..C-1 described by a
class manifest. Interchange formats are documented in the README
(sparse prediction CSV, dense ``.npz``, class manifest CSV, JSON-lines
label files).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, IngestError, UnknownIdError

PREDICTION_CSV_HEADER = ["image_id", "class_id", "logit", "probability"]
MANIFEST_CSV_HEADER = [
    "class_id",
    "wnid",
    "display_name",
    "is_animal",
    "is_finegrained_animal",
]
DENSE_PROB_SUM_TOL = 1e-4


@dataclass(frozen=True)
class ClassInfo:
    """One class of the label space."""

    class_id: int
    wnid: str | None
    display_name: str
    is_animal: bool
    is_finegrained_animal: bool


class ClassManifest:
    """The full class space, indexed by contiguous class id 0..C-1."""

    def __init__(self, classes: list[ClassInfo]):
        ids = [c.class_id for c in classes]
        if sorted(ids) != list(range(len(classes))):
            raise ContractError("class ids must be unique and contiguous from 0")
        self.classes = sorted(classes, key=lambda c: c.class_id)

    def __len__(self) -> int:
        return len(self.classes)

    def __getitem__(self, class_id: int) -> ClassInfo:
        if not 0 <= class_id < len(self.classes):
            raise UnknownIdError(f"unknown class id {class_id}")
        return self.classes[class_id]

    def animal_classes(self) -> frozenset[int]:
        return frozenset(c.class_id for c in self.classes if c.is_animal)

    def finegrained_animal_classes(self) -> frozenset[int]:
        return frozenset(
            c.class_id for c in self.classes if c.is_finegrained_animal
        )


def _parse_bool(token: str, *, path, line: int) -> bool:
    norm = token.strip().lower()
    if norm in ("1", "true", "yes"):
        return True
    if norm in ("0", "false", "no", ""):
        return False
    raise IngestError(f"invalid boolean {token!r}", path=path, line=line)


def load_class_manifest(path) -> ClassManifest:
    """Load a class manifest CSV (``class_id,wnid,...``)."""
    path = Path(path)
    classes = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_CSV_HEADER:
            raise IngestError(
                f"expected header {','.join(MANIFEST_CSV_HEADER)}", path=path, line=1
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise IngestError("expected 5 columns", path=path, line=lineno)
            try:
                class_id = int(row[0])
            except ValueError:
                raise IngestError(
                    f"invalid class id {row[0]!r}", path=path, line=lineno
                ) from None
            classes.append(
                ClassInfo(
                    class_id=class_id,
                    wnid=row[1].strip() or None,
                    display_name=row[2],
                    is_animal=_parse_bool(row[3], path=path, line=lineno),
                    is_finegrained_animal=_parse_bool(row[4], path=path, line=lineno),
                )
            )
    try:
        return ClassManifest(classes)
    except ContractError as exc:
        raise IngestError(str(exc), path=path) from None


def save_class_manifest(manifest: ClassManifest, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_CSV_HEADER)
        for c in manifest.classes:
            writer.writerow(
                [
                    c.class_id,
                    c.wnid or "",
                    c.display_name,
                    int(c.is_animal),
                    int(c.is_finegrained_animal),
                ]
            )


class PredictionSet:
    """One model's scores over (image, class) pairs.

    Storage is row-compressed: ``indptr`` delimits each image's slice of
    the parallel ``class_ids`` / ``logits`` / ``probs`` arrays. Dense sets
    are the special case where every image stores all C classes. Instances
    are immutable after construction and safe to share across threads.
    """

    def __init__(
        self,
        model_name: str,
        image_ids: list[str],
        n_classes: int,
        indptr: np.ndarray,
        class_ids: np.ndarray,
        logits: np.ndarray,
        probs: np.ndarray,
        *,
        probs_derived: bool = False,
        metadata: dict | None = None,
    ):
        self.model_name = model_name
        self.image_ids = tuple(image_ids)
        self.n_classes = int(n_classes)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.class_ids = np.asarray(class_ids, dtype=np.int64)
        self.logits = np.asarray(logits, dtype=np.float64)
        self.probs = np.asarray(probs, dtype=np.float64)
        self.probs_derived = bool(probs_derived)
        self.metadata = dict(metadata or {})
        self._index = {img: i for i, img in enumerate(self.image_ids)}
        if len(self._index) != len(self.image_ids):
            raise ContractError("duplicate image ids")
        if len(self.indptr) != len(self.image_ids) + 1:
            raise ContractError("indptr length mismatch")
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.class_ids):
            raise ContractError("indptr bounds mismatch")
        if np.any(np.diff(self.indptr) < 1):
            raise ContractError("every image needs at least one stored entry")

    # -- lookup ---------------------------------------------------------

    def image_index(self, image_id: str) -> int:
        try:
            return self._index[image_id]
        except KeyError:
            raise UnknownIdError(
                f"image {image_id!r} not in prediction set {self.model_name!r}"
            ) from None

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._index

    def entries(self, image_id: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(class_ids, logits, probs) stored for one image."""
        i = self.image_index(image_id)
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.class_ids[lo:hi], self.logits[lo:hi], self.probs[lo:hi]

    def ranked_classes(self, image_id: str) -> np.ndarray:
        """Stored classes ordered by descending logit, ties to lower class id."""
        cls, lg, _ = self.entries(image_id)
        order = np.lexsort((cls, -lg))
        return cls[order]

    def top1(self, image_id: str) -> int:
        return int(self.ranked_classes(image_id)[0])

    def kth_prediction(self, image_id: str, k: int) -> int:
        """The k-th ranked class (1-based). Raises if fewer are stored."""
        ranked = self.ranked_classes(image_id)
        if k < 1 or k > len(ranked):
            raise ContractError(
                f"image {image_id!r} has {len(ranked)} stored predictions, "
                f"cannot rank k={k}"
            )
        return int(ranked[k - 1])

    @property
    def is_dense(self) -> bool:
        return len(self.class_ids) == len(self.image_ids) * self.n_classes

    def to_dense(self) -> tuple[np.ndarray, np.ndarray]:
        """(N, C) logit and probability matrices; requires dense storage."""
        if not self.is_dense:
            raise ContractError(
                f"prediction set {self.model_name!r} is sparse; export and "
                "re-ingest a dense .npz to use dense operations"
            )
        n = len(self.image_ids)
        order = np.argsort(
            self.class_ids.reshape(n, self.n_classes), axis=1, kind="stable"
        )
        rows = np.arange(n)[:, None]
        lg = self.logits.reshape(n, self.n_classes)[rows, order]
        pr = self.probs.reshape(n, self.n_classes)[rows, order]
        return lg, pr

    def pairs(self):
        """Yield (image_id, class_id, logit, prob) in storage order."""
        for i, img in enumerate(self.image_ids):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            for j in range(lo, hi):
                yield img, int(self.class_ids[j]), float(self.logits[j]), float(
                    self.probs[j]
                )

    def __eq__(self, other) -> bool:
        if not isinstance(other, PredictionSet):
            return NotImplemented
        return (
            self.model_name == other.model_name
            and self.image_ids == other.image_ids
            and self.n_classes == other.n_classes
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.class_ids, other.class_ids)
            and np.array_equal(self.logits, other.logits)
            and np.array_equal(self.probs, other.probs)
            and self.probs_derived == other.probs_derived
            and self.metadata == other.metadata
        )

    def __repr__(self) -> str:
        kind = "dense" if self.is_dense else "sparse"
        return (
            f"PredictionSet({self.model_name!r}, {len(self.image_ids)} images, "
            f"{self.n_classes} classes, {kind})"
        )

    # -- construction ---------------------------------------------------

    @classmethod
    def from_rows(
        cls,
        model_name: str,
        rows: list[tuple[str, int, float, float | None]],
        *,
        n_classes: int | None = None,
        metadata: dict | None = None,
        path=None,
    ) -> "PredictionSet":
        """Build from (image_id, class_id, logit, prob-or-None) rows.

        Image indices are assigned in order of first appearance. Missing
        probabilities must be missing for the whole file and are then
        derived by per-image softmax over the stored logits.
        """
        if not rows:
            raise IngestError("no prediction rows", path=path)
        have_prob = [r[3] is not None for r in rows]
        if any(have_prob) and not all(have_prob):
            raise IngestError(
                "probability column must be fully present or fully empty",
                path=path,
            )
        derive = not have_prob[0]

        image_order: dict[str, int] = {}
        per_image: dict[str, list[tuple[int, float, float]]] = {}
        seen: set[tuple[str, int]] = set()
        for img, cid, logit, prob in rows:
            key = (img, cid)
            if key in seen:
                raise IngestError(
                    f"duplicate entry for image {img!r} class {cid}", path=path
                )
            seen.add(key)
            if img not in image_order:
                image_order[img] = len(image_order)
                per_image[img] = []
            per_image[img].append((cid, logit, 0.0 if derive else prob))

        images = list(image_order)
        if n_classes is None:
            n_classes = max(r[1] for r in rows) + 1
        indptr = [0]
        all_cls: list[int] = []
        all_lg: list[float] = []
        all_pr: list[float] = []
        for img in images:
            ent = sorted(per_image[img])
            cids = [e[0] for e in ent]
            lgs = np.array([e[1] for e in ent], dtype=np.float64)
            if any(c < 0 or c >= n_classes for c in cids):
                raise IngestError(
                    f"class id out of range 0..{n_classes - 1} for image {img!r}",
                    path=path,
                )
            if derive:
                shifted = lgs - lgs.max()
                ex = np.exp(shifted)
                prs = ex / ex.sum()
            else:
                prs = np.array([e[2] for e in ent], dtype=np.float64)
                if len(cids) == n_classes:
                    total = prs.sum()
                    if abs(total - 1.0) > DENSE_PROB_SUM_TOL:
                        raise IngestError(
                            f"dense probabilities for image {img!r} sum to "
                            f"{total:.6f}, expected 1 within {DENSE_PROB_SUM_TOL}",
                            path=path,
                        )
            all_cls.extend(cids)
            all_lg.extend(lgs.tolist())
            all_pr.extend(prs.tolist())
            indptr.append(len(all_cls))
        return cls(
            model_name,
            images,
            n_classes,
            np.array(indptr),
            np.array(all_cls),
            np.array(all_lg),
            np.array(all_pr),
            probs_derived=derive,
            metadata=metadata,
        )

    @classmethod
    def from_dense(
        cls,
        model_name: str,
        image_ids: list[str],
        logits: np.ndarray,
        probs: np.ndarray | None = None,
        *,
        metadata: dict | None = None,
    ) -> "PredictionSet":
        """Build from (N, C) matrices; probs derived by softmax when omitted."""
        logits = np.asarray(logits, dtype=np.float64)
        n, c = logits.shape
        if len(image_ids) != n:
            raise ContractError("image id count does not match logit rows")
        derived = probs is None
        if derived:
            shifted = logits - logits.max(axis=1, keepdims=True)
            ex = np.exp(shifted)
            probs = ex / ex.sum(axis=1, keepdims=True)
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (n, c):
            raise ContractError("probability matrix shape mismatch")
        indptr = np.arange(n + 1, dtype=np.int64) * c
        class_ids = np.tile(np.arange(c, dtype=np.int64), n)
        return cls(
            model_name,
            list(image_ids),
            c,
            indptr,
            class_ids,
            logits.reshape(-1),
            probs.reshape(-1),
            probs_derived=derived,
            metadata=metadata,
        )


def _detect_format(path: Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("csv-sparse", "binary-dense"):
            raise ContractError(f"unknown prediction format {fmt!r}")
        return fmt
    return "binary-dense" if path.suffix == ".npz" else "csv-sparse"


def ingest_predictions(
    path,
    format: str | None = None,
    *,
    model_name: str | None = None,
    n_classes: int | None = None,
) -> PredictionSet:
    """Ingest a prediction file.

    The format is ``csv-sparse`` or ``binary-dense``, chosen by file
    extension (``.npz`` is dense) when not given explicitly. The model
    name defaults to the file stem.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError("file not found", path=path)
    fmt = _detect_format(path, format)
    if fmt == "binary-dense":
        return _ingest_dense(path, model_name)
    return _ingest_sparse_csv(path, model_name, n_classes)


def _parse_float(token: str, what: str, *, path, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise IngestError(f"invalid {what} {token!r}", path=path, line=line) from None
    if not math.isfinite(value):
        raise IngestError(f"non-finite {what}", path=path, line=line)
    return value


def _ingest_sparse_csv(
    path: Path, model_name: str | None, n_classes: int | None
) -> PredictionSet:
    rows: list[tuple[str, int, float, float | None]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != PREDICTION_CSV_HEADER:
            raise IngestError(
                f"expected header {','.join(PREDICTION_CSV_HEADER)}",
                path=path,
                line=1,
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise IngestError("expected 4 columns", path=path, line=lineno)
            img = row[0].strip()
            if not img:
                raise IngestError("empty image id", path=path, line=lineno)
            try:
                cid = int(row[1])
            except ValueError:
                raise IngestError(
                    f"invalid class id {row[1]!r}", path=path, line=lineno
                ) from None
            logit = _parse_float(row[2], "logit", path=path, line=lineno)
            prob: float | None = None
            if row[3].strip():
                prob = _parse_float(row[3], "probability", path=path, line=lineno)
                if not 0.0 <= prob <= 1.0:
                    raise IngestError(
                        f"probability out of range: {prob}", path=path, line=lineno
                    )
            rows.append((img, cid, logit, prob))
    return PredictionSet.from_rows(
        model_name or path.stem, rows, n_classes=n_classes, path=path
    )


def _ingest_dense(path: Path, model_name: str | None) -> PredictionSet:
    with np.load(path, allow_pickle=False) as data:
        required = {"image_ids", "logits", "probs", "model_name", "probs_derived"}
        missing = required - set(data.files)
        if missing:
            raise IngestError(f"missing arrays: {sorted(missing)}", path=path)
        image_ids = [str(s) for s in data["image_ids"]]
        logits = np.asarray(data["logits"], dtype=np.float64)
        probs = np.asarray(data["probs"], dtype=np.float64)
        name = model_name or str(data["model_name"])
        derived = bool(data["probs_derived"])
        metadata = {}
        if "metadata_json" in data.files:
            metadata = json.loads(str(data["metadata_json"]))
    if logits.ndim != 2 or logits.shape != probs.shape:
        raise IngestError("logits and probs must be matching 2-D arrays", path=path)
    if logits.shape[0] != len(image_ids):
        raise IngestError("image id count does not match matrix rows", path=path)
    if not np.all(np.isfinite(logits)) or not np.all(np.isfinite(probs)):
        raise IngestError("non-finite score", path=path)
    if np.any(probs < 0.0) or np.any(probs > 1.0):
        raise IngestError("probability out of range", path=path)
    sums = probs.sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > DENSE_PROB_SUM_TOL)[0]
    if len(bad):
        raise IngestError(
            f"dense probabilities for image {image_ids[bad[0]]!r} sum to "
            f"{sums[bad[0]]:.6f}, expected 1 within {DENSE_PROB_SUM_TOL}",
            path=path,
        )
    pset = PredictionSet.from_dense(name, image_ids, logits, probs, metadata=metadata)
    pset.probs_derived = derived
    return pset


def export_predictions(pset: PredictionSet, path) -> None:
    """Write a prediction set; format chosen by extension (.csv or .npz)."""
    path = Path(path)
    if path.suffix == ".npz":
        if not pset.is_dense:
            raise ContractError("binary-dense export requires dense storage")
        lg, pr = pset.to_dense()
        np.savez(
            path,
            image_ids=np.array(pset.image_ids),
            logits=lg,
            probs=pr,
            model_name=pset.model_name,
            probs_derived=pset.probs_derived,
            metadata_json=json.dumps(pset.metadata, sort_keys=True),
        )
        return
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_CSV_HEADER)
        for img, cid, logit, prob in pset.pairs():
            writer.writerow(
                [img, cid, repr(logit), "" if pset.probs_derived else repr(prob)]
            )


# -- single-label originals ----------------------------------------------


def load_original_labels(path) -> dict[str, int]:
    """Load the original single-label assignment (CSV ``image_id,class_id``)."""
    path = Path(path)
    labels: dict[str, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["image_id", "class_id"]:
            raise IngestError("expected header image_id,class_id", path=path, line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise IngestError("expected 2 columns", path=path, line=lineno)
            img = row[0].strip()
            if img in labels:
                raise IngestError(f"duplicate image {img!r}", path=path, line=lineno)
            try:
                labels[img] = int(row[1])
            except ValueError:
                raise IngestError(
                    f"invalid class id {row[1]!r}", path=path, line=lineno
                ) from None
    if not labels:
        raise IngestError("no label rows", path=path)
    return labels


def save_original_labels(labels: dict[str, int], path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "class_id"])
        for img in sorted(labels):
            writer.writerow([img, labels[img]])


# -- multi-label sets ------------------------------------------------------


@dataclass
class ReaLLabelSet:
    """Final per-image label sets; an empty set marks the image excluded."""

    labels: dict[str, frozenset[int]]

    def __post_init__(self):
        self.labels = {img: frozenset(s) for img, s in self.labels.items()}

    def is_excluded(self, image_id: str) -> bool:
        return not self[image_id]

    def __getitem__(self, image_id: str) -> frozenset[int]:
        try:
            return self.labels[image_id]
        except KeyError:
            raise UnknownIdError(f"image {image_id!r} not in label set") from None

    def __contains__(self, image_id: str) -> bool:
        return image_id in self.labels

    def __len__(self) -> int:
        return len(self.labels)

    def non_excluded(self) -> list[str]:
        return [img for img in self.labels if self.labels[img]]

    def pairs(self) -> set[tuple[str, int]]:
        return {(img, c) for img, s in self.labels.items() for c in s}

    def label_count(self) -> int:
        return sum(len(s) for s in self.labels.values())


@dataclass
class GoldStandard:
    """Expert multi-label annotations over a small image subset."""

    labels: dict[str, frozenset[int]]
    expert_count: int = 5

    def __post_init__(self):
        self.labels = {img: frozenset(s) for img, s in self.labels.items()}

    def pairs(self) -> set[tuple[str, int]]:
        return {(img, c) for img, s in self.labels.items() for c in s}


def _load_label_jsonl(path) -> dict[str, frozenset[int]]:
    path = Path(path)
    labels: dict[str, frozenset[int]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                raise IngestError("invalid JSON", path=path, line=lineno) from None
            if not isinstance(obj, dict) or "image_id" not in obj or "labels" not in obj:
                raise IngestError(
                    "expected object with image_id and labels", path=path, line=lineno
                )
            img = str(obj["image_id"])
            if img in labels:
                raise IngestError(f"duplicate image {img!r}", path=path, line=lineno)
            raw = obj["labels"]
            if not isinstance(raw, list) or not all(isinstance(c, int) for c in raw):
                raise IngestError(
                    "labels must be a list of class ids", path=path, line=lineno
                )
            if len(set(raw)) != len(raw):
                raise IngestError("duplicate class in label set", path=path, line=lineno)
            labels[img] = frozenset(raw)
    return labels


def ingest_labels(path) -> ReaLLabelSet:
    """Load a JSON-lines label file (empty label array = excluded image)."""
    return ReaLLabelSet(_load_label_jsonl(path))


def load_gold_standard(path, expert_count: int = 5) -> GoldStandard:
    return GoldStandard(_load_label_jsonl(path), expert_count=expert_count)


def export_labels(labels: ReaLLabelSet, path) -> None:
    """Write a label file deterministically (images and labels sorted)."""
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as fh:
            for img in sorted(labels.labels):
                obj = {"image_id": img, "labels": sorted(labels.labels[img])}
                fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise ContractError(f"cannot write label file {path}: {exc}") from exc


# -- proposal sets ---------------------------------------------------------

TAG_ORIGINAL = "original-label"


def tag_top1(model: str) -> str:
    return f"top1:{model}"


def tag_logit_pool(model: str) -> str:
    return f"logit-pool:{model}"


def tag_prob_pool(model: str) -> str:
    return f"prob-pool:{model}"


@dataclass
class ProposalSet:
    """Candidate labels per image, each with its provenance tags."""

    proposals: dict[str, dict[int, frozenset[str]]] = field(default_factory=dict)

    def labels_for(self, image_id: str) -> frozenset[int]:
        try:
            return frozenset(self.proposals[image_id])
        except KeyError:
            raise UnknownIdError(f"image {image_id!r} has no proposals") from None

    def provenance(self, image_id: str, class_id: int) -> frozenset[str]:
        return self.proposals[image_id][class_id]

    def pairs(self) -> set[tuple[str, int]]:
        return {(img, c) for img, m in self.proposals.items() for c in m}

    def image_ids(self) -> list[str]:
        return list(self.proposals)

    def mean_proposals_per_image(self) -> float:
        if not self.proposals:
            return 0.0
        return sum(len(m) for m in self.proposals.values()) / len(self.proposals)


def export_proposals(proposals: ProposalSet, path) -> None:
    """Write proposals as JSON lines, deterministically ordered."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for img in sorted(proposals.proposals):
            entry = {
                "image_id": img,
                "proposals": [
                    {"class_id": c, "provenance": sorted(tags)}
                    for c, tags in sorted(proposals.proposals[img].items())
                ],
            }
            fh.write(json.dumps(entry, separators=(",", ":")) + "\n")


def ingest_proposals(path) -> ProposalSet:
    path = Path(path)
    result: dict[str, dict[int, frozenset[str]]] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                raise IngestError("invalid JSON", path=path, line=lineno) from None
            img = str(obj["image_id"])
            if img in result:
                raise IngestError(f"duplicate image {img!r}", path=path, line=lineno)
            entry: dict[int, frozenset[str]] = {}
            for p in obj["proposals"]:
                cid = int(p["class_id"])
                if cid in entry:
                    raise IngestError(
                        f"duplicate proposal class {cid}", path=path, line=lineno
                    )
                entry[cid] = frozenset(p["provenance"])
            result[img] = entry
    return ProposalSet(result)
