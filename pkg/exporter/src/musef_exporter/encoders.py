"""Local deterministic feature encoders.

Both encoders are self-contained: no downloaded weights, no network.
Text rows come from a per-token hash seeded RNG, image rows from patch
statistics pushed through a fixed random projection. Outputs are f32
matrices with a row count cap and zero padding, plus the number of
rows that carry signal.
"""

from __future__ import annotations

import hashlib
import math
from typing import Protocol

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, EncodeError

_PATCH = 8  # pixels per cell side after resize


def _keyed_generator(material: bytes) -> np.random.Generator:
    digest = hashlib.blake2b(material, digest_size=16).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest, "little")))


class TextEncoder(Protocol):
    def encode(self, text: str) -> tuple[np.ndarray, int]: ...


class ImageEncoder(Protocol):
    def encode(self, path: str) -> tuple[np.ndarray, int]: ...


class HashTextEncoder:
    """Token-level embeddings from hashed whitespace tokens.

    Each lowercased token maps to a fixed unit-norm vector drawn from a
    Philox stream keyed by the token's BLAKE2b digest, so the same word
    always produces the same row in any corpus.
    """

    def __init__(self, rows: int, dim: int) -> None:
        self.rows = rows
        self.dim = dim

    def encode(self, text: str) -> tuple[np.ndarray, int]:
        out = np.zeros((self.rows, self.dim), dtype=np.float32)
        tokens = text.lower().split()[: self.rows]
        for i, token in enumerate(tokens):
            row = _keyed_generator(b"text.token\x00" + token.encode("utf-8")).standard_normal(self.dim)
            out[i] = (row / np.linalg.norm(row)).astype(np.float32)
        return out, len(tokens)


class PatchImageEncoder:
    """Region-level features from a fixed grid of image patches.

    The image is resized to a square grid of 8x8 cells; each cell
    contributes channel means, channel stds, and its grid position,
    projected to the output width by a matrix fixed at construction.
    Every row describes a real region, so the valid count is the cap.
    """

    def __init__(self, rows: int, dim: int) -> None:
        self.rows = rows
        self.dim = dim
        self.grid = math.isqrt(rows - 1) + 1  # smallest g with g*g >= rows
        proj = _keyed_generator(b"image.patch.projection").standard_normal((8, dim))
        self._proj = proj / math.sqrt(8.0)

    def encode(self, path: str) -> tuple[np.ndarray, int]:
        try:
            with Image.open(path) as img:
                rgb = img.convert("RGB").resize(
                    (self.grid * _PATCH, self.grid * _PATCH), Image.BILINEAR)
        except (OSError, UnidentifiedImageError, ValueError) as exc:
            raise EncodeError(f"cannot read image {path!r}: {exc}") from exc
        arr = np.asarray(rgb, dtype=np.float64) / 255.0
        stats = np.zeros((self.rows, 8))
        for cell in range(self.rows):
            r, c = divmod(cell, self.grid)
            block = arr[r * _PATCH:(r + 1) * _PATCH, c * _PATCH:(c + 1) * _PATCH]
            stats[cell, 0:3] = block.mean(axis=(0, 1))
            stats[cell, 3:6] = block.std(axis=(0, 1))
            stats[cell, 6] = (c + 0.5) / self.grid
            stats[cell, 7] = (r + 0.5) / self.grid
        return (stats @ self._proj).astype(np.float32), self.rows


TEXT_ENCODERS = {"hash-v1": HashTextEncoder}
IMAGE_ENCODERS = {"patch-v1": PatchImageEncoder}


def make_text_encoder(encoder_id: str, rows: int, dim: int) -> TextEncoder:
    if encoder_id not in TEXT_ENCODERS:
        known = ", ".join(sorted(TEXT_ENCODERS))
        raise ConfigError(f"unknown text encoder {encoder_id!r}; available: {known}")
    return TEXT_ENCODERS[encoder_id](rows, dim)


def make_image_encoder(encoder_id: str, rows: int, dim: int) -> ImageEncoder:
    if encoder_id not in IMAGE_ENCODERS:
        known = ", ".join(sorted(IMAGE_ENCODERS))
        raise ConfigError(f"unknown image encoder {encoder_id!r}; available: {known}")
    return IMAGE_ENCODERS[encoder_id](rows, dim)
