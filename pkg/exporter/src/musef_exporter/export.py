"""Corpus-to-MUSEF export orchestration."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .encoders import make_image_encoder, make_text_encoder
from .errors import ConfigError, EncodeError, InputError
from .musef import ExportedSample, write_musef
from .records import RawRecord


@dataclass(frozen=True)
class ExportConfig:
    """Encoder choice and output geometry for one export run.

    k_t/k_v cap the token and region row counts, d_t/d_v are the
    per-row feature widths. Shorter texts are zero-padded up to k_t and
    the padding is excluded from the sample's valid-row count.
    """

    text_encoder: str = "hash-v1"
    image_encoder: str = "patch-v1"
    k_t: int = 8
    d_t: int = 8
    k_v: int = 4
    d_v: int = 8

    def __post_init__(self) -> None:
        for name in ("k_t", "d_t", "k_v", "d_v"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class ExportResult:
    out_path: str
    exported: int
    sha256: str | None
    skipped: list[tuple[str, str]] = field(default_factory=list)


def _write_report(result: ExportResult, n_input: int) -> None:
    report = {
        "exported": result.exported,
        "input_records": n_input,
        "out": result.out_path,
        "sha256": result.sha256,
        "skipped": [{"id": rid, "reason": reason} for rid, reason in result.skipped],
    }
    with open(result.out_path + ".report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def export(records: list[RawRecord], config: ExportConfig, out_path: str) -> ExportResult:
    """Encode records and write a MUSEF v2 file plus a sidecar report.

    Records whose image cannot be read are skipped and listed in the
    sidecar at <out_path>.report.json; the run only fails outright when
    no record survives. All exported samples go to the train split and
    the header seed is 0, since encoding consumes no run-level RNG.
    """
    text_enc = make_text_encoder(config.text_encoder, config.k_t, config.d_t)
    image_enc = make_image_encoder(config.image_encoder, config.k_v, config.d_v)
    samples: list[ExportedSample] = []
    skipped: list[tuple[str, str]] = []
    for rec in records:
        try:
            text, vt = text_enc.encode(rec.text) if rec.text is not None else (None, 0)
            image, vv = image_enc.encode(rec.image) if rec.image is not None else (None, 0)
        except EncodeError as exc:
            skipped.append((rec.id, str(exc)))
            continue
        samples.append(ExportedSample(rec.id, rec.label, text, image, vt, vv))
    if not samples:
        failed = ExportResult(out_path, 0, None, skipped)
        _write_report(failed, len(records))
        raise InputError(f"all {len(records)} records failed to encode; nothing to write")
    digest = write_musef(out_path, samples, 0,
                         config.k_t, config.d_t, config.k_v, config.d_v)
    result = ExportResult(out_path, len(samples), digest, skipped)
    _write_report(result, len(records))
    return result
