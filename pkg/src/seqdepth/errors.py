"""Exception types shared across the package."""


class SeqDepthError(Exception):
    """Base class for all errors raised by this package."""


class ZeroRowError(SeqDepthError):
    """A profile or matrix row sums to zero and cannot be normalized."""


class DimensionMismatchError(SeqDepthError):
    """Objects that must share an ambient dimension do not."""


class InvalidTrialsError(SeqDepthError):
    """A trial count or grid parameter is out of range."""


class ScenarioMismatchError(SeqDepthError):
    """A weight model's frequency list is misaligned with the population."""


class MassMismatchError(SeqDepthError):
    """Two distributions passed to the transport solver carry unequal mass."""


class TooLargeError(SeqDepthError):
    """An exhaustive oracle was asked for more atoms than it enumerates."""


class SizeLimitError(SeqDepthError):
    """A dense cost matrix would exceed the configured entry budget."""


class ParseError(SeqDepthError):
    """An input file is malformed; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyMatrixError(SeqDepthError):
    """A filtering step removed every row or column."""


class InsufficientDataError(SeqDepthError):
    """Not enough points survive to fit the requested statistic."""


class UnseenCellError(SeqDepthError):
    """A cell received zero reads under the 'reject' unseen policy."""


class InvariantViolationError(SeqDepthError):
    """A runtime invariant check failed during a simulation trial."""
