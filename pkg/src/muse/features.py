"""Modality feature matrices, global-local enhancement, and the
partial-modality substitution rule.

A sample carries one feature matrix per modality (K rows of width D).
When both modalities are present, each is enhanced by a gate computed
from the other modality's global (row-mean) vector:

    d        = local (*) rowwise_broadcast(FC(other_global))
    enhanced = (1 + Norm(d)) (*) local

where Norm is per-row L2 normalization with Norm(0) := 0. When exactly
one modality is present, the present one passes through raw and the
absent one contributes an exactly-zero matrix; the absent matrix's
values are never read (reads are counted so tests can assert this).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .errors import ContractError, DataError, ShapeError
from .layers import Linear

__all__ = ["FeatureMatrix", "EnhancedPair", "global_pool", "enhance", "apply_partial_rule"]

MODALITIES = ("text", "image")


class FeatureMatrix:
    """One modality's K x D feature block plus its presence flag.

    An absent matrix is an all-zero placeholder; reading ``values``
    bumps ``reads`` so contracts about untouched absent modalities are
    checkable.
    """

    __slots__ = ("modality", "k", "d", "present", "valid_rows", "reads", "_values")

    def __init__(
        self,
        modality: str,
        values: np.ndarray | None = None,
        present: bool = True,
        shape: tuple[int, int] | None = None,
        valid_rows: int | None = None,
    ):
        if modality not in MODALITIES:
            raise DataError(f"unknown modality {modality!r}")
        self.modality = modality
        self.reads = 0
        if present:
            if values is None:
                raise DataError(f"present {modality} matrix needs values")
            arr = np.asarray(values, dtype=np.float64)
        else:
            if shape is None:
                shape = np.asarray(values).shape if values is not None else None
            if shape is None:
                raise DataError(f"absent {modality} matrix needs an explicit shape")
            if values is not None and np.any(np.asarray(values) != 0.0):
                raise DataError(f"absent {modality} matrix must be the all-zero placeholder")
            arr = np.zeros(shape, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"{modality} matrix must be 2-D with K,D >= 1, got {arr.shape}")
        self._values = arr
        self.k, self.d = arr.shape
        self.present = present
        self.valid_rows = self.k if valid_rows is None else int(valid_rows)
        if not 0 <= self.valid_rows <= self.k:
            raise DataError(f"valid_rows {valid_rows} outside [0, {self.k}]")

    @property
    def values(self) -> np.ndarray:
        self.reads += 1
        return self._values

    @property
    def shape(self) -> tuple[int, int]:
        return (self.k, self.d)

    def copy(self) -> "FeatureMatrix":
        if self.present:
            return FeatureMatrix(self.modality, self._values.copy(), True, valid_rows=self.valid_rows)
        return FeatureMatrix(self.modality, None, False, shape=self.shape, valid_rows=self.valid_rows)

    def __repr__(self) -> str:
        state = "present" if self.present else "absent"
        return f"FeatureMatrix({self.modality}, {self.k}x{self.d}, {state})"


@dataclass
class EnhancedPair:
    """Enhanced (or rule-substituted) matrices, still in raw modality widths."""

    text_enhanced: ag.Tensor
    image_enhanced: ag.Tensor
    text_present: bool = True
    image_present: bool = True


def global_pool(f: FeatureMatrix) -> ag.Tensor:
    """Column-wise mean over rows: the modality's global summary vector."""
    if not f.present:
        raise ContractError(f"global_pool on absent {f.modality} matrix; callers must branch first")
    return ag.reduce_mean(ag.tensor(f.values), axis=0)


def enhance(local: FeatureMatrix, other_global: ag.Tensor, fc: Linear) -> ag.Tensor:
    """Gate each local row by the L2-normalized cross-modal direction."""
    if not local.present:
        raise ContractError(f"enhance on absent {local.modality} matrix")
    if other_global.values.ndim != 1:
        raise ShapeError(f"other_global must be 1-D, got {other_global.shape}")
    gate = fc(other_global)
    if gate.shape != (local.d,):
        raise ShapeError(f"guidance FC output {gate.shape} does not match local width ({local.d},)")
    local_t = ag.tensor(local.values)
    d = ag.mul(local_t, ag.tile_rows(gate, local.k))
    return ag.mul(ag.add_scalar(ag.l2_normalize_rows(d), 1.0), local_t)


def enhance_rows(local_rows: ag.Tensor, gate: ag.Tensor) -> ag.Tensor:
    """Batched form of the same gate: one row per sample, same position.

    local_rows and gate are both (B, D); used by the model to enhance a
    whole presence-group one sequence position at a time.
    """
    if local_rows.shape != gate.shape:
        raise ShapeError(f"enhance_rows: local {local_rows.shape} vs gate {gate.shape}")
    d = ag.mul(local_rows, gate)
    return ag.mul(ag.add_scalar(ag.l2_normalize_rows(d), 1.0), local_rows)


def apply_partial_rule(
    text: FeatureMatrix, image: FeatureMatrix, fc_t: Linear, fc_i: Linear
) -> EnhancedPair:
    """Enhance both modalities, or substitute per the presence pattern.

    fc_t guides text (maps image-global to text width); fc_i guides image.
    """
    if not text.present and not image.present:
        raise DataError("sample has neither modality")
    if text.present and image.present:
        t_enh = enhance(text, global_pool(image), fc_t)
        i_enh = enhance(image, global_pool(text), fc_i)
        return EnhancedPair(t_enh, i_enh, True, True)
    if text.present:
        return EnhancedPair(
            ag.tensor(text.values),
            ag.tensor(np.zeros(image.shape)),
            True,
            False,
        )
    return EnhancedPair(
        ag.tensor(np.zeros(text.shape)),
        ag.tensor(image.values),
        False,
        True,
    )
