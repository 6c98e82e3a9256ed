"""The three classification paths.

* Linear path: mean-pool each enhanced matrix, project each modality to
  width D_h with a bias-free FC, and feed the pair through a searched
  linear chain. Output vector Z1.
* Sequence path: project every row to D_h, concatenate the two position
  lists along the sequence axis, run the searched sequence chain, and
  mean-pool the positions. Output vector Z2.
* Static auxiliary path (structure fixed, never searched), in two
  variants: a shared-encoder Siamese head producing Z3 = [cosine,
  |e_t - e_i|], or an in-batch cluster reference whose Z3 is the
  leave-one-out mean of the dynamic scores within a sample's cluster.

All paths consume batched (B, width) tensors; a sequence is a list of
such tensors, one per position. Modality projections are bias-free so
an absent modality's zero matrix contributes an exact zero downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from . import rng
from .errors import ConfigError, ShapeError
from .layers import Linear

__all__ = [
    "PathConfig", "PathOutput", "LinearPath", "SequencePath",
    "StaticSiamese", "ClusterReference", "static_cluster_reference", "kmeans_assign",
]


@dataclass
class PathConfig:
    d_h: int = 8
    n_linear: int = 3
    m_seq: int = 3
    static_variant: str = "siamese"
    cluster_k: int = 2

    def __post_init__(self):
        if self.d_h < 1 or self.n_linear < 1 or self.m_seq < 1 or self.cluster_k < 1:
            raise ConfigError(
                f"path sizes must be >= 1, got d_h={self.d_h} n={self.n_linear} "
                f"m={self.m_seq} k={self.cluster_k}"
            )
        if self.static_variant not in ("siamese", "cluster_reference"):
            raise ConfigError(f"unknown static variant {self.static_variant!r}")


@dataclass
class PathOutput:
    z1: ag.Tensor | None
    z2: ag.Tensor | None
    z3: ag.Tensor | None
    y1: ag.Tensor | None
    y2: ag.Tensor | None
    y3: ag.Tensor | None


def mean_positions(positions: list[ag.Tensor]) -> ag.Tensor:
    acc = positions[0]
    for p in positions[1:]:
        acc = ag.add(acc, p)
    return ag.mul_scalar(acc, 1.0 / len(positions))


class LinearPath:
    """pool -> bias-free per-modality FC -> searched chain -> head."""

    def __init__(self, d_t: int, d_v: int, chain, seed: int):
        d_h = chain.d_h
        self.proj_t = Linear("linear_path.proj_t", d_t, d_h, seed, bias=False)
        self.proj_i = Linear("linear_path.proj_i", d_v, d_h, seed, bias=False)
        self.head = Linear("linear_path.head", d_h, 1, seed, bias=True)
        self.chain = chain

    def forward(self, text_positions: list[ag.Tensor], image_positions: list[ag.Tensor]):
        a = self.proj_t(mean_positions(text_positions))
        b = self.proj_i(mean_positions(image_positions))
        z1 = self.chain.forward(a, b)
        return z1, self.head(z1)

    def parameters(self) -> dict[str, ag.Tensor]:
        named = {}
        for part in (self.proj_t, self.proj_i, self.head):
            named.update(part.parameters())
        named.update(self.chain.parameters())
        return named

    def arch_parameters(self) -> dict[str, ag.Tensor]:
        return self.chain.arch_parameters()


class SequencePath:
    """per-row bias-free FC -> sequence-axis concat -> chain -> mean-pool -> head."""

    def __init__(self, d_t: int, d_v: int, chain, seed: int):
        d_h = chain.d_h
        self.proj_t = Linear("sequence_path.proj_t", d_t, d_h, seed, bias=False)
        self.proj_i = Linear("sequence_path.proj_i", d_v, d_h, seed, bias=False)
        self.head = Linear("sequence_path.head", d_h, 1, seed, bias=True)
        self.chain = chain

    def forward(self, text_positions: list[ag.Tensor], image_positions: list[ag.Tensor]):
        pt = [self.proj_t(p) for p in text_positions]
        pv = [self.proj_i(p) for p in image_positions]
        out_positions = self.chain.forward(pt, pv)
        z2 = mean_positions(out_positions)
        return z2, self.head(z2)

    def parameters(self) -> dict[str, ag.Tensor]:
        named = {}
        for part in (self.proj_t, self.proj_i, self.head):
            named.update(part.parameters())
        named.update(self.chain.parameters())
        return named

    def arch_parameters(self) -> dict[str, ag.Tensor]:
        return self.chain.arch_parameters()


class StaticSiamese:
    """Fixed-structure similarity head over one shared two-layer encoder.

    Both pooled modality vectors pass through the same encoder; an
    absent modality's embedding is the zero vector, making its cosine
    component exactly 0 by the zero-vector convention.
    """

    def __init__(self, d_t: int, d_v: int, d_h: int, seed: int):
        self.d_h = d_h
        self.proj_t = Linear("static_path.proj_t", d_t, d_h, seed, bias=False)
        self.proj_i = Linear("static_path.proj_i", d_v, d_h, seed, bias=False)
        self.enc1 = Linear("static_path.enc1", d_h, d_h, seed, bias=True)
        self.enc2 = Linear("static_path.enc2", d_h, d_h, seed, bias=True)
        self.head = Linear("static_path.head", 1 + d_h, 1, seed, bias=True)

    def _encode(self, x: ag.Tensor) -> ag.Tensor:
        return self.enc2(ag.tanh(self.enc1(x)))

    def forward(
        self,
        pooled_text: ag.Tensor,
        pooled_image: ag.Tensor,
        text_present: bool,
        image_present: bool,
    ):
        batch = pooled_text.shape[0]
        zero = ag.tensor(np.zeros((batch, self.d_h)))
        e_t = self._encode(self.proj_t(pooled_text)) if text_present else zero
        e_i = self._encode(self.proj_i(pooled_image)) if image_present else zero
        z3 = ag.concat([ag.cosine_rows(e_t, e_i), ag.absolute(ag.sub(e_t, e_i))], axis=1)
        return z3, self.head(z3)

    def parameters(self) -> dict[str, ag.Tensor]:
        named = {}
        for part in (self.proj_t, self.proj_i, self.enc1, self.enc2, self.head):
            named.update(part.parameters())
        return named

    def arch_parameters(self) -> dict[str, ag.Tensor]:
        return {}


def kmeans_assign(features: np.ndarray, k: int, seed: int, iters: int = 20) -> np.ndarray:
    """Deterministic seeded Lloyd's iterations; returns cluster labels.

    Initial centroids are batch_mean + batch_std * N(0,1) draws, which
    depend on the batch only through permutation-invariant statistics,
    so permuting the batch permutes the labels identically. Distance
    ties assign to the lowest centroid index; empty clusters keep their
    previous centroid.
    """
    if features.ndim != 2:
        raise ShapeError(f"k-means features must be 2-D, got {features.shape}")
    n = features.shape[0]
    if k > n:
        raise ConfigError(f"k={k} exceeds batch size {n}")
    g = rng.stream(seed, "cluster.init")
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    centroids = mean + std * g.standard_normal((k, features.shape[1]))
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        d2 = ((features[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        for c in range(k):
            members = features[labels == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    return labels


def static_cluster_reference(
    features: np.ndarray, scores: np.ndarray, k: int, seed: int, iters: int = 20
) -> np.ndarray:
    """Leave-one-out mean dynamic score over each sample's cluster.

    Singleton clusters fall back to the sample's own score. The result
    is a reference signal, not a trainable quantity; callers wrap it as
    a constant.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if features.shape[0] != scores.shape[0]:
        raise ShapeError(f"{features.shape[0]} feature rows vs {scores.shape[0]} scores")
    labels = kmeans_assign(features, k, seed, iters)
    z3 = np.zeros_like(scores)
    for i in range(len(scores)):
        mask = labels == labels[i]
        mask[i] = False
        z3[i] = scores[mask].mean() if mask.any() else scores[i]
    return z3


class ClusterReference:
    """Parameter-free wrapper selecting the cluster-reference variant."""

    def __init__(self, k: int, seed: int, iters: int = 20):
        if k < 1:
            raise ConfigError(f"cluster count must be >= 1, got {k}")
        self.k = k
        self.seed = seed
        self.iters = iters

    def forward(self, features: np.ndarray, scores: np.ndarray) -> ag.Tensor:
        z3 = static_cluster_reference(features, scores, self.k, self.seed, self.iters)
        return ag.tensor(z3.reshape(-1, 1))

    def parameters(self) -> dict[str, ag.Tensor]:
        return {}

    def arch_parameters(self) -> dict[str, ag.Tensor]:
        return {}
