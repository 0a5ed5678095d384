"""Exception types shared across the toolkit."""


class RealabelError(Exception):
    """Base class for all toolkit errors."""


class IngestError(RealabelError, ValueError):
    """A file failed validation during ingestion.

    Carries the offending line number when one is known.
    """

    def __init__(self, message: str, *, path=None, line: int | None = None):
        detail = message
        if path is not None:
            detail = f"{path}: {detail}"
        if line is not None:
            detail = f"{detail} (line {line})"
        super().__init__(detail)
        self.path = path
        self.line = line


class UnknownIdError(RealabelError, KeyError):
    """An image or class id was referenced that no loaded dataset defines.

    Unknown ids are always a hard error, never a silent skip.
    """


class ContractError(RealabelError, ValueError):
    """An operation precondition was violated."""


class SubsetSearchError(RealabelError, ValueError):
    """No model subset satisfied the recall floor."""

    def __init__(self, floor: float, best_recall: float):
        super().__init__(
            f"no model subset reaches recall floor {floor:.4f}; "
            f"best achievable recall is {best_recall:.4f}"
        )
        self.floor = floor
        self.best_recall = best_recall


class AnswerRejected(RealabelError, ValueError):
    """The annotation service refused to record an answer."""


class LeakageError(RealabelError, ValueError):
    """A fold prediction set was produced by a model trained on that fold."""
