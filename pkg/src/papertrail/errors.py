"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: DataError -> 2, ProviderError -> 3.
"""


class PapertrailError(Exception):
    """Base class for all package errors."""


class DataError(PapertrailError):
    """Malformed, inconsistent, or missing input data (corpus, queries, index files)."""


class ProviderError(PapertrailError):
    """An external provider (embedding service, re-ranker, generator) failed or misbehaved."""


class GenerationParseError(ProviderError):
    """Generator output did not follow the required format; carries the raw output."""

    def __init__(self, message: str, raw_output: str):
        super().__init__(message)
        self.raw_output = raw_output
