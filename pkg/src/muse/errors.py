"""Exception taxonomy shared by every muse module.

The CLI maps these onto exit codes: ConfigError -> 2, DataError and
ParseError -> 3, NumericError -> 4. Anything else is a plain bug and
surfaces with exit code 1.
"""


class MuseError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(MuseError):
    """Tensor dimensions disagree. The message names both shapes."""


class ContractError(MuseError):
    """A documented API contract was violated by the caller."""


class DomainError(MuseError):
    """Operation applied outside its mathematical domain (e.g. empty axis)."""


class GraphError(ContractError):
    """Backward-pass misuse: non-scalar loss, missing reset, detached loss."""


class RegistryError(MuseError):
    """Unknown operator name for a search-space registry."""


class ConfigError(MuseError):
    """Invalid or inconsistent configuration."""


class DataError(MuseError):
    """Invalid dataset contents (e.g. a sample with no modality at all)."""


class ParseError(DataError):
    """Malformed feature file; carries a byte offset where known."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericError(MuseError):
    """Non-finite value detected where the pipeline requires finite math."""
