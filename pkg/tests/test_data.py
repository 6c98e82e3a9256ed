"""Synthetic generator, corruption protocol, and feature-file formats."""

import math
import struct

import numpy as np
import pytest

from muse.data import (
    MAGIC,
    MAX_RULE_THRESHOLD,
    DataConfig,
    DatasetSplit,
    Sample,
    check_musef,
    corrupt_partial,
    dataset_checksum,
    generate_synthetic,
    planted_optimal_fusion,
    read_features,
    read_jsonl,
    serialize_features,
    write_features,
    write_jsonl,
)
from muse.errors import ConfigError, ContractError, DataError, ParseError
from muse.features import FeatureMatrix


def _pooled(sample, modality):
    return getattr(sample, modality).values.mean(axis=0)


def _logistic_probe(x, y, iters=800, lr=0.5):
    """Full-batch logistic regression; returns training accuracy."""
    x = np.hstack([x, np.ones((len(x), 1))])
    w = np.zeros(x.shape[1])
    for _ in range(iters):
        p = 1.0 / (1.0 + np.exp(-(x @ w)))
        w -= lr * (x.T @ (p - y)) / len(x)
    return float(np.mean(((x @ w) > 0).astype(int) == y))


# ---------------------------------------------------------------------------
# config and container validation


def test_default_split_sizes():
    ds = generate_synthetic(DataConfig(seed=1))
    assert (len(ds.train), len(ds.valid), len(ds.test)) == (400, 400, 200)
    assert ds.dims() == (2, 8, 2, 8)
    assert ds.seed == 1 and ds.provenance == "synthetic"


@pytest.mark.parametrize("kwargs", [
    dict(n=2),
    dict(k_t=0),
    dict(d_v=0),
    dict(planted_rule="xor"),
    dict(noise=-0.1),
    dict(missing_text_rate=-0.01),
    dict(missing_image_rate=1.5),
    dict(missing_text_rate=0.6, missing_image_rate=0.6),
    dict(train_fraction=0.5, valid_fraction=0.5),
    dict(train_fraction=0.0),
    dict(seed=-1),
    dict(n=3, train_fraction=0.1, valid_fraction=0.4),
])
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ConfigError):
        DataConfig(**kwargs)


def test_sample_validation():
    t = FeatureMatrix("text", np.zeros((1, 2)) + 1.0)
    v = FeatureMatrix("image", np.ones((1, 3)))
    with pytest.raises(DataError):
        Sample("a", t, v, label=2)
    with pytest.raises(DataError):
        Sample("a", v, t, label=0)  # swapped modalities
    with pytest.raises(DataError):
        Sample(
            "a",
            FeatureMatrix("text", None, present=False, shape=(1, 2)),
            FeatureMatrix("image", None, present=False, shape=(1, 3)),
            label=0,
        )


def test_split_rejects_duplicate_ids():
    def mk(sid):
        return Sample(sid, FeatureMatrix("text", np.ones((1, 2))),
                      FeatureMatrix("image", np.ones((1, 2))), 0)
    with pytest.raises(DataError):
        DatasetSplit([mk("x")], [mk("x")], [], seed=0)
    ds = DatasetSplit([mk("x")], [mk("y")], [], seed=0)
    assert ds.size == 2
    with pytest.raises(ConfigError):
        ds.split("holdout")
    with pytest.raises(DataError):
        DatasetSplit([mk("x")], [], [], seed=0, provenance="scraped")


def test_planted_optimal_fusion_table():
    assert planted_optimal_fusion("sum_separable") == "Sum"
    assert planted_optimal_fusion("max_separable") == "Max"
    assert planted_optimal_fusion("interaction") is None
    with pytest.raises(ConfigError):
        planted_optimal_fusion("parity")


def test_max_rule_threshold_is_median_of_max():
    # P(max(U,V) <= m) = Phi(m)^2 must equal 1/2 at the pinned constant
    phi = 0.5 * (1.0 + math.erf(MAX_RULE_THRESHOLD / math.sqrt(2.0)))
    assert abs(phi * phi - 0.5) < 1e-12


# ---------------------------------------------------------------------------
# generator properties


@pytest.mark.parametrize("rule", ["sum_separable", "max_separable", "interaction"])
def test_labels_roughly_balanced(rule):
    n = 1000
    for seed in range(5):
        ds = generate_synthetic(DataConfig(n=n, planted_rule=rule, seed=seed))
        fake = sum(s.label for s in ds.all_samples())
        assert abs(fake - n / 2) < 2 * math.sqrt(n), (rule, seed, fake)


def test_generation_is_deterministic():
    cfg = DataConfig(n=50, seed=9, missing_text_rate=0.2, missing_image_rate=0.2)
    a = serialize_features(generate_synthetic(cfg))
    b = serialize_features(generate_synthetic(cfg))
    assert a == b
    c = serialize_features(generate_synthetic(DataConfig(n=50, seed=10,
                                                         missing_text_rate=0.2,
                                                         missing_image_rate=0.2)))
    assert a != c


def test_values_survive_float32_exactly():
    ds = generate_synthetic(DataConfig(n=40, seed=3, noise=0.25))
    for s in ds.all_samples():
        for m in (s.text, s.image):
            arr = m.values
            assert np.array_equal(arr, arr.astype(np.float32).astype(np.float64))


def test_sum_rule_separable_jointly_not_marginally():
    ds = generate_synthetic(DataConfig(n=1000, noise=0.0, seed=4))
    xs = np.array([np.concatenate([_pooled(s, "text"), _pooled(s, "image")])
                   for s in ds.train])
    ys = np.array([s.label for s in ds.train], dtype=np.float64)
    assert _logistic_probe(xs, ys) == 1.0
    # the confounder creates interleaved one-modality bands: affine scoring
    # of text alone cannot beat ~3 of the 4 bands
    text_only = np.array([_pooled(s, "text") for s in ds.train])
    assert _logistic_probe(text_only, ys) < 0.85
    image_only = np.array([_pooled(s, "image") for s in ds.train])
    assert _logistic_probe(image_only, ys) < 0.85


def test_interaction_rule_needs_a_cross_term():
    ds = generate_synthetic(DataConfig(n=1000, noise=0.0, planted_rule="interaction", seed=5))
    ys = np.array([s.label for s in ds.train], dtype=np.float64)
    concat = np.array([np.concatenate([_pooled(s, "text"), _pooled(s, "image")])
                       for s in ds.train])
    # population-optimal linear accuracy is 50%; allow training-set overfit
    assert _logistic_probe(concat, ys) < 0.70
    outer = np.array([np.outer(_pooled(s, "text"), _pooled(s, "image")).ravel()
                      for s in ds.train])
    assert _logistic_probe(outer, ys, iters=2000) >= 0.95


def test_missing_rates_and_coupling():
    cfg = DataConfig(n=1000, seed=6, missing_text_rate=0.3, missing_image_rate=0.3)
    ds = generate_synthetic(cfg)
    samples = ds.all_samples()
    no_text = sum(1 for s in samples if not s.text.present)
    no_image = sum(1 for s in samples if not s.image.present)
    assert all(s.text.present or s.image.present for s in samples)
    assert abs(no_text - 300) < 4 * math.sqrt(1000 * 0.3 * 0.7)
    assert abs(no_image - 300) < 4 * math.sqrt(1000 * 0.3 * 0.7)


def test_missing_text_rate_one_drops_all_text():
    ds = generate_synthetic(DataConfig(n=20, seed=0, missing_text_rate=1.0))
    assert all(not s.text.present and s.image.present for s in ds.all_samples())


def test_absent_matrices_never_generated_with_values():
    ds = generate_synthetic(DataConfig(n=30, seed=2, missing_text_rate=0.5))
    for s in ds.all_samples():
        if not s.text.present:
            assert np.array_equal(s.text.values, np.zeros((2, 8)))


# ---------------------------------------------------------------------------
# corruption protocol


def test_corrupt_partial_drops_exactly_one_modality():
    ds = generate_synthetic(DataConfig(n=200, seed=7))
    out = corrupt_partial(ds, seed=11)
    for s in out.all_samples():
        assert s.text.present != s.image.present
    kept_text = sum(1 for s in out.all_samples() if s.text.present)
    assert 60 < kept_text < 140  # fair coin over 200 samples
    assert out.seed == ds.seed
    assert (len(out.train), len(out.valid), len(out.test)) == (80, 80, 40)


def test_corrupt_partial_keeps_labels_and_values():
    ds = generate_synthetic(DataConfig(n=60, seed=8))
    by_id = {s.id: s for s in ds.all_samples()}
    out = corrupt_partial(ds, seed=1)
    for s in out.all_samples():
        orig = by_id[s.id]
        assert s.label == orig.label
        kept = s.text if s.text.present else s.image
        ref = orig.text if s.text.present else orig.image
        assert np.array_equal(kept.values, ref.values)


def test_corrupt_partial_is_reproducible_and_seed_sensitive():
    ds = generate_synthetic(DataConfig(n=80, seed=9))
    a = serialize_features(corrupt_partial(ds, seed=5))
    b = serialize_features(corrupt_partial(ds, seed=5))
    c = serialize_features(corrupt_partial(ds, seed=6))
    assert a == b
    assert a != c


def test_corrupt_partial_rejects_partial_input():
    ds = generate_synthetic(DataConfig(n=30, seed=1, missing_image_rate=0.4))
    with pytest.raises(ContractError):
        corrupt_partial(ds, seed=0)


# ---------------------------------------------------------------------------
# MUSEF binary format


def test_musef_round_trip_v1(tmp_path):
    cfg = DataConfig(n=50, seed=12, missing_text_rate=0.2, missing_image_rate=0.1)
    ds = generate_synthetic(cfg)
    path = str(tmp_path / "a.musef")
    write_features(ds, path)
    back = read_features(path)
    assert back.provenance == "file" and back.seed == 12
    assert [s.id for s in back.all_samples()] == [s.id for s in ds.all_samples()]
    for s, r in zip(ds.all_samples(), back.all_samples()):
        assert s.label == r.label
        assert s.text.present == r.text.present
        assert s.image.present == r.image.present
        if s.text.present:
            assert np.array_equal(s.text.values, r.text.values)
        if s.image.present:
            assert np.array_equal(s.image.values, r.image.values)


def test_musef_write_read_write_is_byte_identical(tmp_path):
    for version in (1, 2):
        ds = generate_synthetic(DataConfig(n=25, seed=13, missing_text_rate=0.3))
        path = str(tmp_path / f"v{version}.musef")
        write_features(ds, path, version=version)
        with open(path, "rb") as fh:
            original = fh.read()
        assert serialize_features(read_features(path), version=version) == original


def test_musef_v2_preserves_validity_lengths(tmp_path):
    t = FeatureMatrix("text", np.array([[1.0, 2.0], [0.0, 0.0]]), valid_rows=1)
    v = FeatureMatrix("image", np.array([[3.0, 4.0], [5.0, 6.0]]))
    ds = DatasetSplit([Sample("only", t, v, 1)], [], [], seed=0)
    path = str(tmp_path / "pad.musef")
    write_features(ds, path, version=2)
    back = read_features(path)
    s = back.train[0]
    assert s.text.valid_rows == 1
    assert s.image.valid_rows == 2
    # version 1 has no validity field, so the reader assumes full matrices
    write_features(ds, path, version=1)
    assert read_features(path).train[0].text.valid_rows == 2


def test_dataset_checksum_matches_file_hash(tmp_path):
    ds = generate_synthetic(DataConfig(n=20, seed=14))
    path = str(tmp_path / "c.musef")
    write_features(ds, path)
    summary = check_musef(path)
    assert summary["sha256"] == dataset_checksum(ds)
    assert summary["version"] == 1
    assert summary["seed"] == 14
    assert (summary["n_train"], summary["n_valid"], summary["n_test"]) == (8, 8, 4)
    assert summary["samples"] == 20
    assert summary["fake"] + summary["real"] == 20
    assert summary["k_t"] == 2 and summary["d_t"] == 8
    assert summary["bytes"] == len(serialize_features(ds))


def _build_musef(version=1, seed=7, counts=(1, 0, 0), dims=(1, 2, 1, 2), samples=()):
    buf = bytearray(MAGIC)
    buf += struct.pack("<HQIIIIIII", version, seed, *counts, *dims)
    for s in samples:
        rid = s["id"].encode("utf-8") if isinstance(s["id"], str) else s["id"]
        buf += struct.pack("<H", len(rid)) + rid
        buf += struct.pack("<BB", s.get("label", 0), s.get("presence", 3))
        if version == 2:
            buf += struct.pack("<HH", s.get("vt", 1), s.get("vv", 1))
        for key in ("text", "image"):
            if s.get(key) is not None:
                buf += np.asarray(s[key], dtype="<f4").tobytes()
    return bytes(buf)


_FULL = dict(id="s0", label=1, presence=3, text=[[1.0, 2.0]], image=[[3.0, 4.0]])


def _write(tmp_path, payload):
    path = str(tmp_path / "bad.musef")
    with open(path, "wb") as fh:
        fh.write(payload)
    return path


def test_musef_parse_error_offsets(tmp_path):
    good = _build_musef(samples=[_FULL])
    with pytest.raises(ParseError, match="byte 0"):
        read_features(_write(tmp_path, b"NOTMUS" + good[6:]))
    with pytest.raises(ParseError, match="version 9"):
        read_features(_write(tmp_path, _build_musef(version=9, samples=[_FULL])))
    with pytest.raises(ParseError, match="header truncated"):
        read_features(_write(tmp_path, good[:20]))
    with pytest.raises(ParseError, match="text matrix truncated at byte"):
        read_features(_write(tmp_path, good[:-10]))
    with pytest.raises(ParseError, match="trailing bytes"):
        read_features(_write(tmp_path, good + b"\x00"))


def test_musef_rejects_bad_sample_fields(tmp_path):
    cases = [
        (dict(_FULL, label=2), "label 2"),
        (dict(_FULL, presence=0, text=None, image=None), "neither modality"),
        (dict(_FULL, presence=5), "presence bits"),
        (dict(_FULL, id=b"\xff\xfe"), "not UTF-8"),
    ]
    for sample, needle in cases:
        payload = _build_musef(samples=[sample])
        with pytest.raises(ParseError, match=needle):
            read_features(_write(tmp_path, payload))


def test_musef_rejects_non_finite_values(tmp_path):
    bad = dict(_FULL, text=[[np.nan, 2.0]])
    with pytest.raises(ParseError, match="non-finite text value"):
        read_features(_write(tmp_path, _build_musef(samples=[bad])))


def test_musef_rejects_zero_dims_and_bad_validity(tmp_path):
    with pytest.raises(ParseError, match="zero matrix dimension"):
        read_features(_write(tmp_path, _build_musef(dims=(0, 2, 1, 2), samples=[])))
    over = dict(_FULL, vt=9, vv=1)
    with pytest.raises(ParseError, match="exceed header dims"):
        read_features(_write(tmp_path, _build_musef(version=2, samples=[over])))
    ghost = dict(id="s0", label=0, presence=2, vt=1, vv=1, image=[[3.0, 4.0]])
    with pytest.raises(ParseError, match="absent modality has nonzero validity"):
        read_features(_write(tmp_path, _build_musef(version=2, samples=[ghost])))


def test_musef_reader_accepts_partial_samples(tmp_path):
    text_only = dict(id="t", label=1, presence=1, text=[[1.0, 2.0]])
    image_only = dict(id="i", label=0, presence=2, image=[[3.0, 4.0]])
    payload = _build_musef(counts=(2, 0, 0), samples=[text_only, image_only])
    ds = read_features(_write(tmp_path, payload))
    a, b = ds.train
    assert a.text.present and not a.image.present
    assert not b.text.present and b.image.present
    assert np.array_equal(a.text.values, [[1.0, 2.0]])
    assert np.array_equal(b.image.values, [[3.0, 4.0]])
    assert np.array_equal(b.text.values, [[0.0, 0.0]])


# ---------------------------------------------------------------------------
# JSON-lines debug format


def test_jsonl_round_trip(tmp_path):
    cfg = DataConfig(n=30, seed=15, missing_text_rate=0.2, missing_image_rate=0.2)
    ds = generate_synthetic(cfg)
    path = str(tmp_path / "d.jsonl")
    write_jsonl(ds, path)
    back = read_jsonl(path, seed=ds.seed)
    assert serialize_features(back) == serialize_features(ds)


def test_jsonl_hand_written_fixture(tmp_path):
    lines = [
        '{"id":"a","split":"train","label":1,"text":[[1.0,2.0]],"image":[[3.0,4.0]]}',
        '{"id":"b","split":"test","label":0,"text":null,"text_shape":[1,2],"image":[[5.0,6.0]]}',
        "",
    ]
    path = str(tmp_path / "fix.jsonl")
    with open(path, "w") as fh:
        fh.write("\n".join(lines))
    ds = read_jsonl(path)
    assert len(ds.train) == 1 and len(ds.valid) == 0 and len(ds.test) == 1
    assert np.array_equal(ds.train[0].text.values, [[1.0, 2.0]])
    b = ds.test[0]
    assert not b.text.present and b.text.shape == (1, 2)
    assert np.array_equal(b.image.values, [[5.0, 6.0]])


@pytest.mark.parametrize("line,needle", [
    ("not json", "invalid JSON"),
    ('{"split":"train","label":1,"text":[[1.0]],"image":[[2.0]]}', "missing key 'id'"),
    ('{"id":"a","split":"dev","label":1,"text":[[1.0]],"image":[[2.0]]}', "unknown split"),
    ('{"id":"a","split":"train","label":3,"text":[[1.0]],"image":[[2.0]]}', "label must be 0 or 1"),
    ('{"id":"a","split":"train","label":1,"text":null,"image":[[2.0]]}', "text_shape"),
    ('{"id":"a","split":"train","label":1,"text":null,"text_shape":[1,2],"image":null,"image_shape":[1,2]}',
     "at least one modality"),
])
def test_jsonl_errors_name_the_line(tmp_path, line, needle):
    path = str(tmp_path / "bad.jsonl")
    with open(path, "w") as fh:
        fh.write('{"id":"ok","split":"train","label":0,"text":[[1.0]],"image":[[2.0]]}\n')
        fh.write(line + "\n")
    with pytest.raises(ParseError, match="line 2") as exc:
        read_jsonl(path)
    assert needle in str(exc.value)
