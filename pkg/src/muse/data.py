"""Synthetic multimodal datasets, the partial-modality corruption
protocol, and feature-file serialization.

The generator plants a cross-modal decision rule so that which fusion
operator is optimal is known by construction:

* sum_separable: text and image latents are s/2 + a and s/2 - a for a
  class signal s = +-1 and a heavy confounder a; their SUM recovers s
  exactly while either latent alone has sign-flipping posterior bands
  that defeat any affine single-modality scorer.
* max_separable: the label is max(t, v) > median-of-max, so the MAX of
  the two latents is the sufficient statistic.
* interaction: the label is t*v > 0 (cross-modal agreement), which no
  single linear fusion recovers.

Each sample's feature matrix is latent * unit_direction + noise, cast
through float32 so every value survives the f32 on-disk format
losslessly. Modality dropping couples both rates through one uniform
draw, so no sample ever loses both modalities.

MUSEF container layout (little-endian throughout):

    offset 0   magic b"MUSEF\\0"
    offset 6   u16 version (1 or 2)
    offset 8   u64 seed
    offset 16  u32 n_train, u32 n_valid, u32 n_test
    offset 28  u32 K_T, u32 D_T, u32 K_V, u32 D_V
    offset 44  samples, train then valid then test:
               u16 id_len, id UTF-8 bytes,
               u8 label, u8 presence (bit0 text, bit1 image),
               [version 2 only: u16 valid_text_rows, u16 valid_image_rows]
               then each PRESENT matrix as f32 row-major, text first.

A JSON-lines debug format (one sample per line, matrices as nested
arrays) exists for hand-written fixtures.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import ConfigError, ContractError, DataError, ParseError
from .features import FeatureMatrix

__all__ = [
    "Sample", "DatasetSplit", "DataConfig",
    "PLANTED_RULES", "planted_optimal_fusion", "MAX_RULE_THRESHOLD",
    "generate_synthetic", "corrupt_partial",
    "write_features", "read_features", "serialize_features",
    "check_musef", "dataset_checksum",
    "write_jsonl", "read_jsonl",
]

PLANTED_RULES = ("sum_separable", "max_separable", "interaction")

# median of max(U, V) for U, V iid standard normal; balances max_separable
MAX_RULE_THRESHOLD = 0.5449521356173603

MAGIC = b"MUSEF\x00"
_HEADER = struct.Struct("<HQIIIIIII")  # version, seed, counts x3, dims x4
HEADER_SIZE = len(MAGIC) + _HEADER.size  # 44
SUPPORTED_VERSIONS = (1, 2)

_SPLIT_NAMES = ("train", "valid", "test")


def planted_optimal_fusion(rule: str) -> str | None:
    """The fusion operator the rule makes optimal (None: no linear one)."""
    if rule not in PLANTED_RULES:
        raise ConfigError(f"unknown planted rule {rule!r}")
    return {"sum_separable": "Sum", "max_separable": "Max", "interaction": None}[rule]


@dataclass
class Sample:
    id: str
    text: FeatureMatrix
    image: FeatureMatrix
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DataError(f"sample {self.id!r}: label must be 0 or 1, got {self.label!r}")
        if self.text.modality != "text" or self.image.modality != "image":
            raise DataError(f"sample {self.id!r}: modality fields are swapped or mistagged")
        if not (self.text.present or self.image.present):
            raise DataError(f"sample {self.id!r}: at least one modality must be present")


@dataclass
class DatasetSplit:
    train: list[Sample]
    valid: list[Sample]
    test: list[Sample]
    seed: int
    provenance: str = "synthetic"

    def __post_init__(self):
        if self.provenance not in ("synthetic", "file"):
            raise DataError(f"unknown provenance {self.provenance!r}")
        ids = [s.id for s in self.all_samples()]
        if len(ids) != len(set(ids)):
            raise DataError("sample ids must be unique across splits")

    def all_samples(self) -> list[Sample]:
        return list(self.train) + list(self.valid) + list(self.test)

    def split(self, name: str) -> list[Sample]:
        if name not in _SPLIT_NAMES:
            raise ConfigError(f"unknown split {name!r}; valid splits are {_SPLIT_NAMES}")
        return getattr(self, name)

    @property
    def size(self) -> int:
        return len(self.train) + len(self.valid) + len(self.test)

    def dims(self) -> tuple[int, int, int, int]:
        """(K_T, D_T, K_V, D_V), uniform across all samples."""
        samples = self.all_samples()
        if not samples:
            raise DataError("empty dataset has no dimensions")
        k_t, d_t = samples[0].text.shape
        k_v, d_v = samples[0].image.shape
        for s in samples:
            if s.text.shape != (k_t, d_t) or s.image.shape != (k_v, d_v):
                raise DataError(f"sample {s.id!r} breaks the uniform K/D contract")
        return k_t, d_t, k_v, d_v


@dataclass
class DataConfig:
    n: int = 1000
    k_t: int = 2
    k_v: int = 2
    d_t: int = 8
    d_v: int = 8
    planted_rule: str = "sum_separable"
    noise: float = 0.1
    missing_text_rate: float = 0.0
    missing_image_rate: float = 0.0
    train_fraction: float = 0.4
    valid_fraction: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.n < 3:
            raise ConfigError(f"need n >= 3 for three nonempty splits, got {self.n}")
        if min(self.k_t, self.k_v, self.d_t, self.d_v) < 1:
            raise ConfigError("matrix dimensions must be >= 1")
        if self.planted_rule not in PLANTED_RULES:
            raise ConfigError(f"unknown planted rule {self.planted_rule!r}")
        if self.noise < 0:
            raise ConfigError(f"noise must be >= 0, got {self.noise}")
        for name in ("missing_text_rate", "missing_image_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.missing_text_rate + self.missing_image_rate > 1.0:
            raise ConfigError(
                "missing_text_rate + missing_image_rate > 1 would drop both "
                "modalities from some sample"
            )
        if not (0 < self.train_fraction and 0 < self.valid_fraction
                and self.train_fraction + self.valid_fraction < 1):
            raise ConfigError("split fractions must be positive and leave a test share")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0 (stored as u64), got {self.seed}")
        n_train = int(self.n * self.train_fraction)
        n_valid = int(self.n * self.valid_fraction)
        if n_train < 1 or n_valid < 1 or self.n - n_train - n_valid < 1:
            raise ConfigError(f"n={self.n} with these fractions leaves an empty split")


# ---------------------------------------------------------------------------
# synthetic generation


def _latents(config: DataConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(text latent, image latent, labels) per the planted rule."""
    g = rng.stream(config.seed, "data.latent")
    n = config.n
    if config.planted_rule == "sum_separable":
        s = g.integers(0, 2, size=n) * 2 - 1
        sign = g.integers(0, 2, size=n) * 2 - 1
        a = sign * (0.75 + np.abs(g.normal(0.0, 0.5, size=n)))
        t = s / 2 + a
        v = s / 2 - a
        labels = (s > 0).astype(np.int64)
    else:
        t = g.standard_normal(n)
        v = g.standard_normal(n)
        if config.planted_rule == "max_separable":
            labels = (np.maximum(t, v) > MAX_RULE_THRESHOLD).astype(np.int64)
        else:  # interaction: cross-modal agreement
            labels = (t * v > 0).astype(np.int64)
    return t, v, labels


def generate_synthetic(config: DataConfig) -> DatasetSplit:
    """Seed-deterministic planted-rule dataset split 40/40/20 by default."""
    n = config.n
    t_lat, v_lat, labels = _latents(config)

    g_dir = rng.stream(config.seed, "data.directions")
    u_t = g_dir.standard_normal(config.d_t)
    u_t /= np.linalg.norm(u_t)
    u_v = g_dir.standard_normal(config.d_v)
    u_v /= np.linalg.norm(u_v)

    eps_t = rng.stream(config.seed, "data.noise.text").standard_normal((n, config.k_t, config.d_t))
    eps_v = rng.stream(config.seed, "data.noise.image").standard_normal((n, config.k_v, config.d_v))
    # float32 cast keeps every value exactly representable in the f32 file format
    text = (t_lat[:, None, None] * u_t[None, None, :] + config.noise * eps_t)
    text = text.astype(np.float32).astype(np.float64)
    image = (v_lat[:, None, None] * u_v[None, None, :] + config.noise * eps_v)
    image = image.astype(np.float32).astype(np.float64)

    # one uniform per sample couples both drop rates: never both modalities
    u = rng.stream(config.seed, "data.missing").uniform(size=n)
    drop_text = u < config.missing_text_rate
    drop_image = (~drop_text) & (u < config.missing_text_rate + config.missing_image_rate)

    samples = []
    for i in range(n):
        if drop_text[i]:
            tm = FeatureMatrix("text", None, present=False, shape=(config.k_t, config.d_t))
        else:
            tm = FeatureMatrix("text", text[i])
        if drop_image[i]:
            vm = FeatureMatrix("image", None, present=False, shape=(config.k_v, config.d_v))
        else:
            vm = FeatureMatrix("image", image[i])
        samples.append(Sample(f"synth-{config.seed}-{i:06d}", tm, vm, int(labels[i])))

    perm = rng.stream(config.seed, "data.split").permutation(n)
    n_train = int(n * config.train_fraction)
    n_valid = int(n * config.valid_fraction)
    train = [samples[i] for i in perm[:n_train]]
    valid = [samples[i] for i in perm[n_train:n_train + n_valid]]
    test = [samples[i] for i in perm[n_train + n_valid:]]
    return DatasetSplit(train, valid, test, seed=config.seed, provenance="synthetic")


def corrupt_partial(ds: DatasetSplit, seed: int) -> DatasetSplit:
    """Remove exactly one modality from every sample by a fair coin.

    Mirrors the fully-partial evaluation protocol: the expected outcome
    is half the samples missing text, half missing images. Labels and
    the kept modality's values are untouched. The input must be fully
    complete; coins are consumed in train, valid, test order.
    """
    for s in ds.all_samples():
        if not (s.text.present and s.image.present):
            raise ContractError(f"sample {s.id!r} is already partial")
    g = rng.stream(seed, "corrupt.coin")

    def strip(samples):
        out = []
        for s in samples:
            if g.integers(0, 2) == 0:
                tm = FeatureMatrix("text", None, present=False, shape=s.text.shape)
                vm = s.image.copy()
            else:
                tm = s.text.copy()
                vm = FeatureMatrix("image", None, present=False, shape=s.image.shape)
            out.append(Sample(s.id, tm, vm, s.label))
        return out

    return DatasetSplit(
        strip(ds.train), strip(ds.valid), strip(ds.test),
        seed=ds.seed, provenance=ds.provenance,
    )


# ---------------------------------------------------------------------------
# MUSEF binary format


def serialize_features(ds: DatasetSplit, version: int = 1) -> bytes:
    """Canonical MUSEF bytes: the same split always serializes identically."""
    if version not in SUPPORTED_VERSIONS:
        raise ConfigError(f"unsupported MUSEF version {version}")
    k_t, d_t, k_v, d_v = ds.dims()
    out = bytearray()
    out += MAGIC
    out += _HEADER.pack(
        version, ds.seed, len(ds.train), len(ds.valid), len(ds.test),
        k_t, d_t, k_v, d_v,
    )
    for s in ds.all_samples():
        raw_id = s.id.encode("utf-8")
        if len(raw_id) > 0xFFFF:
            raise DataError(f"sample id longer than 65535 bytes: {s.id[:40]!r}...")
        presence = (1 if s.text.present else 0) | (2 if s.image.present else 0)
        out += struct.pack("<H", len(raw_id))
        out += raw_id
        out += struct.pack("<BB", s.label, presence)
        if version == 2:
            vt = s.text.valid_rows if s.text.present else 0
            vv = s.image.valid_rows if s.image.present else 0
            out += struct.pack("<HH", vt, vv)
        if s.text.present:
            out += s.text.values.astype("<f4").tobytes()
        if s.image.present:
            out += s.image.values.astype("<f4").tobytes()
    return bytes(out)


def write_features(ds: DatasetSplit, path: str, version: int = 1) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_features(ds, version))


class _Cursor:
    """Byte reader that reports the offset of whatever is missing."""

    def __init__(self, buf: bytes):
        self.buf = buf
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.buf):
            raise ParseError(
                f"{what} truncated at byte {self.offset}: "
                f"expected {n} bytes, found {len(self.buf) - self.offset}"
            )
        chunk = self.buf[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str, what: str):
        st = struct.Struct(fmt)
        return st.unpack(self.take(st.size, what))


def _parse_musef(buf: bytes):
    cur = _Cursor(buf)
    magic = cur.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise ParseError(f"bad magic at byte 0: {magic!r} is not {MAGIC!r}")
    version, seed, n_train, n_valid, n_test, k_t, d_t, k_v, d_v = cur.unpack(
        "<HQIIIIIII", "header"
    )
    if version not in SUPPORTED_VERSIONS:
        raise ParseError(f"unsupported version {version} at byte 6")
    if min(k_t, d_t, k_v, d_v) < 1:
        raise ParseError(f"zero matrix dimension in header at byte 28")
    counts = (n_train, n_valid, n_test)
    samples: list[Sample] = []
    for i in range(sum(counts)):
        what = f"sample {i}"
        start = cur.offset
        (id_len,) = cur.unpack("<H", f"{what} id length")
        raw_id = cur.take(id_len, f"{what} id")
        try:
            sample_id = raw_id.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"{what} id at byte {start + 2} is not UTF-8: {exc}") from exc
        label, presence = cur.unpack("<BB", f"{what} label/presence")
        if label not in (0, 1):
            raise ParseError(f"{what}: label {label} at byte {cur.offset - 2} is not 0/1")
        if presence == 0:
            raise ParseError(f"{what}: presence byte at {cur.offset - 1} says neither modality")
        if presence > 3:
            raise ParseError(f"{what}: unknown presence bits {presence:#x} at byte {cur.offset - 1}")
        text_present = bool(presence & 1)
        image_present = bool(presence & 2)
        vt, vv = k_t, k_v
        if version == 2:
            vt, vv = cur.unpack("<HH", f"{what} validity lengths")
            if (text_present and vt > k_t) or (image_present and vv > k_v):
                raise ParseError(
                    f"{what}: validity rows ({vt},{vv}) exceed header dims at byte {cur.offset - 4}"
                )
            if (not text_present and vt != 0) or (not image_present and vv != 0):
                raise ParseError(
                    f"{what}: absent modality has nonzero validity rows at byte {cur.offset - 4}"
                )

        def read_matrix(k, d, modality):
            mat_off = cur.offset
            raw = cur.take(4 * k * d, f"{what} {modality} matrix")
            arr = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(k, d)
            if not np.all(np.isfinite(arr)):
                raise ParseError(f"{what}: non-finite {modality} value at byte {mat_off}")
            return arr

        if text_present:
            tm = FeatureMatrix("text", read_matrix(k_t, d_t, "text"),
                               valid_rows=vt if version == 2 else None)
        else:
            tm = FeatureMatrix("text", None, present=False, shape=(k_t, d_t))
        if image_present:
            vm = FeatureMatrix("image", read_matrix(k_v, d_v, "image"),
                               valid_rows=vv if version == 2 else None)
        else:
            vm = FeatureMatrix("image", None, present=False, shape=(k_v, d_v))
        samples.append(Sample(sample_id, tm, vm, label))
    if cur.offset != len(buf):
        raise ParseError(
            f"{len(buf) - cur.offset} trailing bytes at offset {cur.offset}"
        )
    return version, seed, counts, (k_t, d_t, k_v, d_v), samples


def read_features(path: str) -> DatasetSplit:
    with open(path, "rb") as fh:
        buf = fh.read()
    _, seed, counts, _, samples = _parse_musef(buf)
    n_train, n_valid, _ = counts
    return DatasetSplit(
        samples[:n_train],
        samples[n_train:n_train + n_valid],
        samples[n_train + n_valid:],
        seed=seed,
        provenance="file",
    )


def check_musef(path: str) -> dict:
    """Validate a MUSEF file and summarize it (including its sha256)."""
    with open(path, "rb") as fh:
        buf = fh.read()
    version, seed, counts, dims, samples = _parse_musef(buf)
    labels = [s.label for s in samples]
    return {
        "version": version,
        "seed": seed,
        "n_train": counts[0],
        "n_valid": counts[1],
        "n_test": counts[2],
        "k_t": dims[0],
        "d_t": dims[1],
        "k_v": dims[2],
        "d_v": dims[3],
        "samples": len(samples),
        "text_absent": sum(1 for s in samples if not s.text.present),
        "image_absent": sum(1 for s in samples if not s.image.present),
        "fake": int(sum(labels)),
        "real": int(len(labels) - sum(labels)),
        "bytes": len(buf),
        "sha256": hashlib.sha256(buf).hexdigest(),
    }


def dataset_checksum(ds: DatasetSplit, version: int = 1) -> str:
    """sha256 of the canonical serialization; stable across read/write."""
    return hashlib.sha256(serialize_features(ds, version)).hexdigest()


# ---------------------------------------------------------------------------
# JSON-lines debug format


def write_jsonl(ds: DatasetSplit, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for split_name in _SPLIT_NAMES:
            for s in ds.split(split_name):
                rec = {
                    "id": s.id,
                    "split": split_name,
                    "label": int(s.label),
                    "text": s.text.values.tolist() if s.text.present else None,
                    "image": s.image.values.tolist() if s.image.present else None,
                }
                if not s.text.present:
                    rec["text_shape"] = list(s.text.shape)
                if not s.image.present:
                    rec["image_shape"] = list(s.image.shape)
                fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def _jsonl_matrix(rec: dict, modality: str, lineno: int) -> FeatureMatrix:
    body = rec.get(modality)
    if body is not None:
        return FeatureMatrix(modality, np.asarray(body, dtype=np.float64))
    shape = rec.get(f"{modality}_shape")
    if shape is None:
        raise ParseError(
            f"line {lineno}: null {modality} needs {modality}_shape for the placeholder"
        )
    return FeatureMatrix(modality, None, present=False, shape=tuple(shape))


def read_jsonl(path: str, seed: int = 0) -> DatasetSplit:
    buckets: dict[str, list[Sample]] = {name: [] for name in _SPLIT_NAMES}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: invalid JSON: {exc}") from exc
            for key in ("id", "split", "label"):
                if key not in rec:
                    raise ParseError(f"line {lineno}: missing key {key!r}")
            if rec["split"] not in _SPLIT_NAMES:
                raise ParseError(f"line {lineno}: unknown split {rec['split']!r}")
            if rec["label"] not in (0, 1):
                raise ParseError(f"line {lineno}: label must be 0 or 1")
            try:
                sample = Sample(
                    str(rec["id"]),
                    _jsonl_matrix(rec, "text", lineno),
                    _jsonl_matrix(rec, "image", lineno),
                    int(rec["label"]),
                )
            except DataError as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
            buckets[rec["split"]].append(sample)
    return DatasetSplit(
        buckets["train"], buckets["valid"], buckets["test"],
        seed=seed, provenance="file",
    )
