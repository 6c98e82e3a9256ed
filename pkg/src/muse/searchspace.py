"""Candidate-operator registries for the searchable cells.

Three registries, enumerable by name so a run can restrict any of them:

* fusion: Sum, Max, Average, Concat. Merge two width-D_h inputs into one;
  Concat appends a bias-free FC 2*D_h -> D_h so every fusion output has
  width D_h and mixed outputs stay summable.
* linear_transform: Sigmoid, ReLU, Tanh, GELU, Softsign, Skip, MLP.
  Width-preserving transforms of a D_h vector (MLP = FC(Sigmoid(FC))).
* seq_transform: Transformer, RNN, LSTM, GRU, Skip. Shape-preserving
  transforms of a length-L sequence of D_h vectors.

Vectors are batched: a "vector" is a (B, D_h) tensor of B samples, and a
sequence is a list of L such tensors (position-major). Single samples
use B=1. Recurrent operators follow the gate conventions used by
mainstream deep-learning libraries (GRU: h' = (1-z)*n + z*h) and
initialize all weights uniform(-1/sqrt(D_h), 1/sqrt(D_h)) from streams
named after each parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .errors import RegistryError, ShapeError
from .layers import Linear, uniform_init

__all__ = [
    "OperatorSpec", "Operator", "operator_names", "operator_spec", "instantiate",
    "positions_from_matrix", "matrix_from_positions",
    "FUSION_NAMES", "LINEAR_TRANSFORM_NAMES", "SEQ_TRANSFORM_NAMES", "KINDS",
]

FUSION_NAMES = ("Sum", "Max", "Average", "Concat")
LINEAR_TRANSFORM_NAMES = ("Sigmoid", "ReLU", "Tanh", "GELU", "Softsign", "Skip", "MLP")
SEQ_TRANSFORM_NAMES = ("Transformer", "RNN", "LSTM", "GRU", "Skip")
KINDS = ("fusion", "linear_transform", "seq_transform")

_BY_KIND = {
    "fusion": FUSION_NAMES,
    "linear_transform": LINEAR_TRANSFORM_NAMES,
    "seq_transform": SEQ_TRANSFORM_NAMES,
}


@dataclass(frozen=True)
class OperatorSpec:
    name: str
    kind: str
    param_shapes: tuple[tuple[int, ...], ...]


class Operator:
    """A candidate operator instance owning its (possibly empty) parameters."""

    def __init__(self, name: str, kind: str):
        self.name = name
        self.kind = kind

    def parameters(self) -> dict[str, ag.Tensor]:
        return {}

    def __call__(self, *args):
        raise NotImplementedError


def positions_from_matrix(m) -> list[ag.Tensor]:
    """Split an L x D matrix into L single-row (1, D) position tensors."""
    arr = m.values if isinstance(m, ag.Tensor) else np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"sequence matrix must be 2-D, got {arr.shape}")
    return [ag.tensor(arr[i : i + 1]) for i in range(arr.shape[0])]


def matrix_from_positions(positions: list[ag.Tensor]) -> np.ndarray:
    return np.concatenate([p.values for p in positions], axis=0)


# ---------------------------------------------------------------------------
# fusion


class _Sum(Operator):
    def __call__(self, a, b):
        return ag.add(a, b)


class _Max(Operator):
    def __call__(self, a, b):
        return ag.maximum(a, b)


class _Average(Operator):
    def __call__(self, a, b):
        return ag.mul_scalar(ag.add(a, b), 0.5)


class _ConcatFuse(Operator):
    def __init__(self, name, kind, d_h, seed, prefix):
        super().__init__(name, kind)
        self.fc = Linear(f"{prefix}.fc", 2 * d_h, d_h, seed, bias=False)

    def parameters(self):
        return self.fc.parameters()

    def __call__(self, a, b):
        axis = 0 if a.values.ndim == 1 else 1
        return self.fc(ag.concat([a, b], axis=axis))


# ---------------------------------------------------------------------------
# linear transforms


class _Activation(Operator):
    _FNS = {
        "Sigmoid": ag.sigmoid,
        "ReLU": ag.relu,
        "Tanh": ag.tanh,
        "GELU": ag.gelu,
        "Softsign": ag.softsign,
    }

    def __call__(self, x):
        return self._FNS[self.name](x)


class _Skip(Operator):
    def __call__(self, x):
        return x


class _MLP(Operator):
    def __init__(self, name, kind, d_h, seed, prefix):
        super().__init__(name, kind)
        self.fc1 = Linear(f"{prefix}.fc1", d_h, d_h, seed, bias=True)
        self.fc2 = Linear(f"{prefix}.fc2", d_h, d_h, seed, bias=True)

    def parameters(self):
        return {**self.fc1.parameters(), **self.fc2.parameters()}

    def __call__(self, x):
        return self.fc2(ag.sigmoid(self.fc1(x)))


# ---------------------------------------------------------------------------
# sequence transforms


class _SeqSkip(Operator):
    def __call__(self, positions):
        return list(positions)


class _Recurrent(Operator):
    """Shared scaffolding: combined input/hidden gate matrices and biases."""

    GATES = 1

    def __init__(self, name, kind, d_h, seed, prefix):
        super().__init__(name, kind)
        self.d_h = d_h
        g = self.GATES
        bound = 1.0 / math.sqrt(d_h)
        self._names = [f"{prefix}.w_ih", f"{prefix}.b_ih", f"{prefix}.w_hh", f"{prefix}.b_hh"]
        self.w_ih = ag.parameter(uniform_init(seed, self._names[0], (d_h, g * d_h), bound))
        self.b_ih = ag.parameter(uniform_init(seed, self._names[1], (g * d_h,), bound))
        self.w_hh = ag.parameter(uniform_init(seed, self._names[2], (d_h, g * d_h), bound))
        self.b_hh = ag.parameter(uniform_init(seed, self._names[3], (g * d_h,), bound))

    def parameters(self):
        return dict(zip(self._names, (self.w_ih, self.b_ih, self.w_hh, self.b_hh)))

    def _affine(self, x, w, b):
        rows = x.shape[0]
        return ag.add(ag.matmul(x, w), ag.tile_rows(b, rows))

    def _zero_state(self, batch):
        return ag.tensor(np.zeros((batch, self.d_h)))

    def _chunk(self, t, i):
        return ag.col_slice(t, i * self.d_h, (i + 1) * self.d_h)


class _RNN(_Recurrent):
    GATES = 1

    def __call__(self, positions):
        h = self._zero_state(positions[0].shape[0])
        out = []
        for x in positions:
            h = ag.tanh(ag.add(self._affine(x, self.w_ih, self.b_ih), self._affine(h, self.w_hh, self.b_hh)))
            out.append(h)
        return out


class _LSTM(_Recurrent):
    GATES = 4  # gate order: input, forget, cell candidate, output

    def __call__(self, positions):
        batch = positions[0].shape[0]
        h, c = self._zero_state(batch), self._zero_state(batch)
        out = []
        for x in positions:
            pre = ag.add(self._affine(x, self.w_ih, self.b_ih), self._affine(h, self.w_hh, self.b_hh))
            i = ag.sigmoid(self._chunk(pre, 0))
            f = ag.sigmoid(self._chunk(pre, 1))
            g = ag.tanh(self._chunk(pre, 2))
            o = ag.sigmoid(self._chunk(pre, 3))
            c = ag.add(ag.mul(f, c), ag.mul(i, g))
            h = ag.mul(o, ag.tanh(c))
            out.append(h)
        return out


class _GRU(_Recurrent):
    GATES = 3  # gate order: reset, update, candidate

    def __call__(self, positions):
        h = self._zero_state(positions[0].shape[0])
        out = []
        for x in positions:
            gi = self._affine(x, self.w_ih, self.b_ih)
            gh = self._affine(h, self.w_hh, self.b_hh)
            r = ag.sigmoid(ag.add(self._chunk(gi, 0), self._chunk(gh, 0)))
            z = ag.sigmoid(ag.add(self._chunk(gi, 1), self._chunk(gh, 1)))
            n = ag.tanh(ag.add(self._chunk(gi, 2), ag.mul(r, self._chunk(gh, 2))))
            one_minus_z = ag.add_scalar(ag.neg(z), 1.0)
            h = ag.add(ag.mul(one_minus_z, n), ag.mul(z, h))
            out.append(h)
        return out


class _Transformer(Operator):
    """One post-norm encoder block: single-head self-attention over the
    positions, then a 2-layer feed-forward of inner width 2*D_h, each
    followed by a residual connection and row layer-normalization. No
    positional encoding is added."""

    def __init__(self, name, kind, d_h, seed, prefix):
        super().__init__(name, kind)
        self.d_h = d_h
        self.wq = Linear(f"{prefix}.q", d_h, d_h, seed, bias=True)
        self.wk = Linear(f"{prefix}.k", d_h, d_h, seed, bias=True)
        self.wv = Linear(f"{prefix}.v", d_h, d_h, seed, bias=True)
        self.wo = Linear(f"{prefix}.out", d_h, d_h, seed, bias=True)
        self.ff1 = Linear(f"{prefix}.ff1", d_h, 2 * d_h, seed, bias=True)
        self.ff2 = Linear(f"{prefix}.ff2", 2 * d_h, d_h, seed, bias=True)
        self.ln1_gain = ag.parameter(np.ones(d_h))
        self.ln1_bias = ag.parameter(np.zeros(d_h))
        self.ln2_gain = ag.parameter(np.ones(d_h))
        self.ln2_bias = ag.parameter(np.zeros(d_h))
        self._prefix = prefix

    def parameters(self):
        named = {}
        for lin in (self.wq, self.wk, self.wv, self.wo, self.ff1, self.ff2):
            named.update(lin.parameters())
        named[f"{self._prefix}.ln1.gain"] = self.ln1_gain
        named[f"{self._prefix}.ln1.bias"] = self.ln1_bias
        named[f"{self._prefix}.ln2.gain"] = self.ln2_gain
        named[f"{self._prefix}.ln2.bias"] = self.ln2_bias
        return named

    def __call__(self, positions):
        length = len(positions)
        batch = positions[0].shape[0]
        inv_scale = 1.0 / math.sqrt(self.d_h)
        qs = [self.wq(x) for x in positions]
        ks = [self.wk(x) for x in positions]
        vs = [self.wv(x) for x in positions]
        out = []
        for i in range(length):
            dots = [
                ag.reshape(ag.mul_scalar(ag.reduce_sum(ag.mul(qs[i], ks[j]), axis=1), inv_scale), (batch, 1))
                for j in range(length)
            ]
            attn = ag.softmax(ag.concat(dots, axis=1), axis=1)
            ctx = ag.scale_rows(vs[0], ag.col_slice(attn, 0, 1))
            for j in range(1, length):
                ctx = ag.add(ctx, ag.scale_rows(vs[j], ag.col_slice(attn, j, j + 1)))
            attended = ag.layer_norm_rows(ag.add(positions[i], self.wo(ctx)), self.ln1_gain, self.ln1_bias)
            ff = self.ff2(ag.gelu(self.ff1(attended)))
            out.append(ag.layer_norm_rows(ag.add(attended, ff), self.ln2_gain, self.ln2_bias))
        return out


# ---------------------------------------------------------------------------
# registry


def operator_names(kind: str) -> tuple[str, ...]:
    try:
        return _BY_KIND[kind]
    except KeyError:
        raise RegistryError(f"unknown operator kind {kind!r} (expected one of {KINDS})") from None


def operator_spec(kind: str, name: str, d_h: int) -> OperatorSpec:
    if name not in operator_names(kind):
        raise RegistryError(f"unknown {kind} operator {name!r}")
    shapes: tuple[tuple[int, ...], ...] = ()
    if kind == "fusion" and name == "Concat":
        shapes = ((2 * d_h, d_h),)
    elif kind == "linear_transform" and name == "MLP":
        shapes = ((d_h, d_h), (d_h,), (d_h, d_h), (d_h,))
    elif kind == "seq_transform":
        if name == "RNN":
            shapes = ((d_h, d_h), (d_h,), (d_h, d_h), (d_h,))
        elif name == "LSTM":
            shapes = ((d_h, 4 * d_h), (4 * d_h,), (d_h, 4 * d_h), (4 * d_h,))
        elif name == "GRU":
            shapes = ((d_h, 3 * d_h), (3 * d_h,), (d_h, 3 * d_h), (3 * d_h,))
        elif name == "Transformer":
            shapes = (
                (d_h, d_h), (d_h,), (d_h, d_h), (d_h,), (d_h, d_h), (d_h,), (d_h, d_h), (d_h,),
                (d_h,), (d_h,),
                (d_h, 2 * d_h), (2 * d_h,), (2 * d_h, d_h), (d_h,),
                (d_h,), (d_h,),
            )
    return OperatorSpec(name=name, kind=kind, param_shapes=shapes)


def instantiate(kind: str, name: str, d_h: int, seed: int, prefix: str) -> Operator:
    if name not in operator_names(kind):
        raise RegistryError(f"unknown {kind} operator {name!r}")
    if kind == "fusion":
        if name == "Sum":
            return _Sum(name, kind)
        if name == "Max":
            return _Max(name, kind)
        if name == "Average":
            return _Average(name, kind)
        return _ConcatFuse(name, kind, d_h, seed, prefix)
    if kind == "linear_transform":
        if name == "Skip":
            return _Skip(name, kind)
        if name == "MLP":
            return _MLP(name, kind, d_h, seed, prefix)
        return _Activation(name, kind)
    if name == "Skip":
        return _SeqSkip(name, kind)
    if name == "RNN":
        return _RNN(name, kind, d_h, seed, prefix)
    if name == "LSTM":
        return _LSTM(name, kind, d_h, seed, prefix)
    if name == "GRU":
        return _GRU(name, kind, d_h, seed, prefix)
    return _Transformer(name, kind, d_h, seed, prefix)
