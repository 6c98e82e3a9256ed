"""Error taxonomy shared by the exporter modules.

Split by who can fix the problem: ConfigError means the invocation is
wrong (unknown encoder, bad dimensions), InputError means the corpus
itself is unusable, EncodeError marks a single record that failed and
should be skipped rather than aborting the batch.
"""


class ExporterError(Exception):
    """Base class for everything raised on purpose by this package."""


class ConfigError(ExporterError):
    pass


class InputError(ExporterError):
    pass


class EncodeError(ExporterError):
    """Per-record failure; the exporter logs it and moves on."""
