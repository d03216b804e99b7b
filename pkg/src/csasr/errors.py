"""Error taxonomy shared by all modules.

The CLI maps ConfigError/DataError/ParseError/TrainingError to exit code 1
and InternalError (invariant violations) to exit code 2.
"""


class CsasrError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CsasrError):
    """Invalid configuration: mismatched symbol tables, bad flags, bad ranges."""


class DataError(CsasrError):
    """Invalid input data: empty corpus, infeasible label lengths, id mismatches."""


class ParseError(DataError):
    """Malformed file; carries a line number when one is known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TrainingError(CsasrError):
    """Training failure: non-finite gradients, collapsed dictionary."""


class InternalError(CsasrError):
    """Invariant violation that indicates a bug, not bad input."""
