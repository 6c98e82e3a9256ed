"""Determinism, shape, and padding contracts for both encoders."""

import numpy as np
import pytest

from musef_exporter import (
    ConfigError,
    EncodeError,
    HashTextEncoder,
    PatchImageEncoder,
    make_image_encoder,
    make_text_encoder,
)

from corpus_helpers import make_image


class TestHashText:
    def test_shape_dtype_and_valid_count(self):
        mat, valid = HashTextEncoder(6, 5).encode("three little words")
        assert mat.shape == (6, 5) and mat.dtype == np.float32
        assert valid == 3

    def test_padding_rows_are_zero(self):
        mat, valid = HashTextEncoder(8, 4).encode("just three tokens")
        assert valid == 3
        assert np.all(mat[3:] == 0.0)
        assert np.all(np.any(mat[:3] != 0.0, axis=1))

    def test_valid_rows_are_unit_norm(self):
        mat, valid = HashTextEncoder(5, 16).encode("alpha beta gamma delta")
        norms = np.linalg.norm(mat[:valid].astype(np.float64), axis=1)
        np.testing.assert_allclose(norms, 1.0, atol=1e-6)

    def test_truncates_at_row_cap(self):
        mat, valid = HashTextEncoder(3, 4).encode("one two three four five")
        assert mat.shape == (3, 4) and valid == 3

    def test_same_token_same_row_everywhere(self):
        a, _ = HashTextEncoder(4, 6).encode("storm warning storm")
        b, _ = HashTextEncoder(4, 6).encode("flood storm")
        np.testing.assert_array_equal(a[0], a[2])
        np.testing.assert_array_equal(a[0], b[1])

    def test_case_folded(self):
        a, _ = HashTextEncoder(2, 6).encode("Storm")
        b, _ = HashTextEncoder(2, 6).encode("sToRm")
        np.testing.assert_array_equal(a, b)

    def test_empty_text_is_all_padding(self):
        mat, valid = HashTextEncoder(4, 3).encode("")
        assert valid == 0 and np.all(mat == 0.0)

    def test_deterministic_across_instances(self):
        text = "the same words every time"
        a, _ = HashTextEncoder(6, 8).encode(text)
        b, _ = HashTextEncoder(6, 8).encode(text)
        assert a.tobytes() == b.tobytes()


class TestPatchImage:
    def test_shape_dtype_and_valid_count(self, tmp_path):
        path = str(tmp_path / "img.png")
        make_image(path, seed=1)
        mat, valid = PatchImageEncoder(4, 7).encode(path)
        assert mat.shape == (4, 7) and mat.dtype == np.float32
        assert valid == 4

    @pytest.mark.parametrize("rows", [1, 2, 4, 5, 9, 10])
    def test_grid_covers_row_cap(self, rows):
        grid = PatchImageEncoder(rows, 3).grid
        assert grid * grid >= rows
        assert (grid - 1) * (grid - 1) < rows

    def test_deterministic_across_instances(self, tmp_path):
        path = str(tmp_path / "img.png")
        make_image(path, seed=2)
        a, _ = PatchImageEncoder(4, 8).encode(path)
        b, _ = PatchImageEncoder(4, 8).encode(path)
        assert a.tobytes() == b.tobytes()

    def test_different_images_differ(self, tmp_path):
        p1, p2 = str(tmp_path / "a.png"), str(tmp_path / "b.png")
        make_image(p1, seed=3)
        make_image(p2, seed=4)
        enc = PatchImageEncoder(4, 8)
        assert enc.encode(p1)[0].tobytes() != enc.encode(p2)[0].tobytes()

    def test_missing_file_is_encode_error(self, tmp_path):
        with pytest.raises(EncodeError, match="cannot read image"):
            PatchImageEncoder(4, 8).encode(str(tmp_path / "gone.png"))

    def test_non_image_file_is_encode_error(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"certainly not pixels")
        with pytest.raises(EncodeError, match="cannot read image"):
            PatchImageEncoder(4, 8).encode(str(path))

    def test_single_region(self, tmp_path):
        path = str(tmp_path / "img.png")
        make_image(path, seed=5)
        mat, valid = PatchImageEncoder(1, 6).encode(path)
        assert mat.shape == (1, 6) and valid == 1


def test_factories_reject_unknown_ids():
    with pytest.raises(ConfigError, match="hash-v1"):
        make_text_encoder("bert-nope", 4, 4)
    with pytest.raises(ConfigError, match="patch-v1"):
        make_image_encoder("resnet-nope", 4, 4)


def test_factories_build_known_ids():
    assert isinstance(make_text_encoder("hash-v1", 4, 4), HashTextEncoder)
    assert isinstance(make_image_encoder("patch-v1", 4, 4), PatchImageEncoder)
