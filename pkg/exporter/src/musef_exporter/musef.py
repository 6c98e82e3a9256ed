"""MUSEF v2 writer.

Layout, little-endian throughout:

    offset 0   magic b"MUSEF\\x00"
    offset 6   u16 version (always 2 here)
    offset 8   u64 seed
    offset 16  u32 n_train, u32 n_valid, u32 n_test
    offset 28  u32 k_t, u32 d_t, u32 k_v, u32 d_v
    offset 44  per sample: u16 id_len, id bytes (UTF-8), u8 label,
               u8 presence (bit 0 text, bit 1 image),
               u16 valid_text_rows, u16 valid_image_rows,
               then each present matrix as row-major f32, text first.

Absent matrices contribute no bytes and must report zero valid rows.
The byte stream is canonical: one logical dataset has exactly one
encoding, so checksums are meaningful.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .errors import InputError

MAGIC = b"MUSEF\x00"
VERSION = 2
_HEADER = struct.Struct("<HQIIIIIII")


@dataclass(frozen=True)
class ExportedSample:
    """One encoded record, ready to serialize.

    A None matrix means the modality is absent; its valid count is
    forced to zero on the wire.
    """

    id: str
    label: int
    text: np.ndarray | None
    image: np.ndarray | None
    text_valid: int
    image_valid: int


def _check_matrix(sample_id: str, name: str, mat: np.ndarray, rows: int, dim: int,
                  valid: int) -> None:
    if mat.shape != (rows, dim):
        raise InputError(
            f"sample {sample_id!r}: {name} matrix is {mat.shape}, expected {(rows, dim)}")
    if not np.all(np.isfinite(mat)):
        raise InputError(f"sample {sample_id!r}: {name} matrix has non-finite values")
    if not 0 <= valid <= rows:
        raise InputError(
            f"sample {sample_id!r}: {name} valid rows {valid} outside [0, {rows}]")


def serialize(samples: list[ExportedSample], seed: int,
              k_t: int, d_t: int, k_v: int, d_v: int) -> bytes:
    """Encode samples as a complete MUSEF v2 byte string.

    All samples land in the train split; downstream tools re-split as
    they see fit.
    """
    if min(k_t, d_t, k_v, d_v) < 1:
        raise InputError(f"feature dims must be positive, got {(k_t, d_t, k_v, d_v)}")
    out = bytearray()
    out += MAGIC
    out += _HEADER.pack(VERSION, seed, len(samples), 0, 0, k_t, d_t, k_v, d_v)
    for s in samples:
        ident = s.id.encode("utf-8")
        if not 0 < len(ident) <= 0xFFFF:
            raise InputError(f"sample id {s.id!r} encodes to {len(ident)} bytes")
        if s.label not in (0, 1):
            raise InputError(f"sample {s.id!r}: label must be 0 or 1, got {s.label!r}")
        if s.text is None and s.image is None:
            raise InputError(f"sample {s.id!r}: both modalities absent")
        presence = (1 if s.text is not None else 0) | (2 if s.image is not None else 0)
        vt = vv = 0
        if s.text is not None:
            _check_matrix(s.id, "text", s.text, k_t, d_t, s.text_valid)
            vt = s.text_valid
        if s.image is not None:
            _check_matrix(s.id, "image", s.image, k_v, d_v, s.image_valid)
            vv = s.image_valid
        out += struct.pack("<H", len(ident)) + ident
        out += struct.pack("<BBHH", s.label, presence, vt, vv)
        if s.text is not None:
            out += np.ascontiguousarray(s.text, dtype="<f4").tobytes()
        if s.image is not None:
            out += np.ascontiguousarray(s.image, dtype="<f4").tobytes()
    return bytes(out)


def write_musef(path: str, samples: list[ExportedSample], seed: int,
                k_t: int, d_t: int, k_v: int, d_v: int) -> str:
    """Serialize to a file and return the payload's SHA-256 hex digest."""
    blob = serialize(samples, seed, k_t, d_t, k_v, d_v)
    with open(path, "wb") as fh:
        fh.write(blob)
    return hashlib.sha256(blob).hexdigest()
