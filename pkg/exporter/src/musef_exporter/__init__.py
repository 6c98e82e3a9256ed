"""Offline exporter that turns raw text/image corpora into MUSEF files."""

from .encoders import (
    IMAGE_ENCODERS,
    TEXT_ENCODERS,
    HashTextEncoder,
    PatchImageEncoder,
    make_image_encoder,
    make_text_encoder,
)
from .errors import ConfigError, EncodeError, ExporterError, InputError
from .export import ExportConfig, ExportResult, export
from .musef import MAGIC, VERSION, ExportedSample, serialize, write_musef
from .records import RawRecord, read_records

__all__ = [
    "IMAGE_ENCODERS",
    "TEXT_ENCODERS",
    "MAGIC",
    "VERSION",
    "ConfigError",
    "EncodeError",
    "ExportConfig",
    "ExportResult",
    "ExportedSample",
    "ExporterError",
    "HashTextEncoder",
    "InputError",
    "PatchImageEncoder",
    "RawRecord",
    "export",
    "make_image_encoder",
    "make_text_encoder",
    "read_records",
    "serialize",
    "write_musef",
]
