"""Parameterised building blocks shared by several modules.

Every layer owns named parameter tensors and exposes them through
``parameters()`` as an ordered ``{qualified_name: Tensor}`` mapping.
Initial values are drawn from a stream keyed by the parameter's
qualified name, so a parameter's initial value depends only on
(seed, name) and not on how many other parameters exist.
"""

from __future__ import annotations

import math

import numpy as np

from . import autograd as ag
from . import rng
from .errors import ShapeError

__all__ = ["Linear", "uniform_init"]


def uniform_init(seed: int, name: str, shape: tuple[int, ...], bound: float) -> np.ndarray:
    """Uniform(-bound, bound) draw from the stream named after the parameter."""
    g = rng.stream(seed, name)
    return g.uniform(-bound, bound, size=shape)


class Linear:
    """Fully connected layer x @ W (+ b) with uniform(-1/sqrt(d_in), ..) init."""

    def __init__(self, name: str, d_in: int, d_out: int, seed: int, bias: bool = True):
        if d_in < 1 or d_out < 1:
            raise ShapeError(f"Linear {name!r}: dimensions must be positive, got {d_in}x{d_out}")
        self.name = name
        self.d_in = d_in
        self.d_out = d_out
        bound = 1.0 / math.sqrt(d_in)
        self.weight = ag.parameter(uniform_init(seed, f"{name}.weight", (d_in, d_out), bound))
        self.bias = ag.parameter(uniform_init(seed, f"{name}.bias", (d_out,), bound)) if bias else None

    def __call__(self, x: ag.Tensor) -> ag.Tensor:
        if x.values.ndim == 1:
            out = ag.matmul(ag.reshape(x, (1, x.shape[0])), self.weight)
            if self.bias is not None:
                out = ag.add(out, ag.tile_rows(self.bias, 1))
            return ag.reshape(out, (self.d_out,))
        out = ag.matmul(x, self.weight)
        if self.bias is not None:
            out = ag.add(out, ag.tile_rows(self.bias, out.shape[0]))
        return out

    def parameters(self) -> dict[str, ag.Tensor]:
        named = {f"{self.name}.weight": self.weight}
        if self.bias is not None:
            named[f"{self.name}.bias"] = self.bias
        return named
