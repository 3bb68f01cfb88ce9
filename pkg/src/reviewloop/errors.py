"""Exception types shared across the package."""


class ReviewLoopError(Exception):
    """Base class for all errors raised by this package."""


class EmptyTextError(ReviewLoopError):
    """Tokenizer input was empty or whitespace-only."""


class EmptyCorpusError(ReviewLoopError):
    """Vocabulary construction received no documents."""


class FormatError(ReviewLoopError):
    """Malformed embedding file. Carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptySequenceError(ReviewLoopError):
    """Model forward pass received a zero-length sequence."""


class NumericError(ReviewLoopError):
    """Non-finite value encountered during forward/backward computation."""


class ShapeError(ReviewLoopError):
    """Mismatched dimensions between related arrays."""


class EmptyPoolError(ReviewLoopError):
    """Training requested on an empty labeled pool."""


class PoolExhaustedError(ReviewLoopError):
    """No unlabeled samples remain to select from."""


class ConfigError(ReviewLoopError):
    """Invalid experiment or service configuration."""


class IngestError(ReviewLoopError):
    """Malformed corpus row. Carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class TaxonomyError(ReviewLoopError):
    """Label name not present in the configured taxonomy."""


class NotFoundError(ReviewLoopError):
    """Unknown document id."""


class ConflictError(ReviewLoopError):
    """Submission for a document that is no longer pending or unlabeled."""


class BusyError(ReviewLoopError):
    """A training job is already running."""


class NoRoundsYetError(ReviewLoopError):
    """Metrics or curve requested before any completed training round."""
