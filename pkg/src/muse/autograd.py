"""Dense-tensor reverse-mode automatic differentiation.

Values are float64 numpy arrays in row-major order. Each operation
returns a fresh :class:`Tensor` that remembers its parents and a
backward closure; :func:`backward` walks the recorded graph once in
reverse topological order and accumulates gradients into every
reachable tensor with ``requires_grad``.

Deliberate contract choices:

* calling :func:`backward` again while any reachable tensor still holds
  a gradient raises :class:`~muse.errors.GraphError` -- gradients never
  accumulate silently across steps;
* ``reduce_max`` and ``maximum`` break ties toward the lowest index /
  first argument, so gradients are deterministic;
* gelu uses the tanh approximation 0.5*x*(1 + tanh(sqrt(2/pi)*(x +
  0.044715*x^3)));
* binary elementwise ops require exactly equal shapes. The few
  broadcasts the model needs are explicit ops (``tile_rows``,
  ``scale_rows``, ``smul``) with their own gradient rules.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, DomainError, GraphError, NumericError, ShapeError

__all__ = [
    "Tensor", "tensor", "parameter", "no_grad", "backward", "zero_grads",
    "matmul", "add", "sub", "mul", "neg", "maximum", "add_scalar", "mul_scalar",
    "smul", "sigmoid", "tanh", "relu", "gelu", "softsign", "absolute", "log",
    "clamp", "reduce_sum", "reduce_mean", "reduce_max", "softmax", "concat",
    "tile_rows", "scale_rows", "row_slice", "col_slice", "transpose2", "reshape",
    "l2_normalize_rows", "layer_norm_rows", "cosine_rows", "stop_gradient",
    "elementwise", "reduce", "SGD", "Adam", "make_optimizer",
]

_GRAD_ENABLED = True
_CHECK_FINITE = True

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_GELU_C = 0.044715


def set_finite_checks(enabled: bool) -> None:
    """Toggle the per-op output finiteness assertion (on by default)."""
    global _CHECK_FINITE
    _CHECK_FINITE = bool(enabled)


@contextlib.contextmanager
def no_grad():
    """Run forward passes without recording the graph (evaluation mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """A float64 array plus the bookkeeping reverse-mode AD needs."""

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward", "_visits")

    def __init__(self, values: np.ndarray, requires_grad: bool = False):
        self.values = values
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[Tensor], None] | None = None
        self._visits = 0

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def numel(self) -> int:
        return self.values.size

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() needs a one-element tensor, got shape {self.shape}")
        return float(self.values.reshape(()))

    def __repr__(self) -> str:
        flag = ", requires_grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


def tensor(data, requires_grad: bool = False) -> Tensor:
    """Wrap array-like data as a constant (or trainable leaf) tensor."""
    values = np.asarray(data, dtype=np.float64)
    return Tensor(values, requires_grad=requires_grad)


def parameter(data) -> Tensor:
    """A trainable leaf tensor."""
    return tensor(data, requires_grad=True)


def _out(values: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    if _CHECK_FINITE and not np.all(np.isfinite(values)):
        raise NumericError("non-finite value produced by a forward operation")
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        t = Tensor(values, requires_grad=True)
        t._parents = tuple(parents)
        t._backward = backward_fn
        return t
    return Tensor(values)


def _acc(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def _need_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Strict 2-D matrix product (m,k) @ (k,n)."""
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree, {a.shape} vs {b.shape}")
    out_values = a.values @ b.values

    def backward_fn(out: Tensor) -> None:
        _acc(a, out.grad @ b.values.T)
        _acc(b, a.values.T @ out.grad)

    return _out(out_values, (a, b), backward_fn)


def transpose2(t: Tensor) -> Tensor:
    if t.values.ndim != 2:
        raise ShapeError(f"transpose2 needs a 2-D tensor, got {t.shape}")

    def backward_fn(out: Tensor) -> None:
        _acc(t, out.grad.T)

    return _out(t.values.T.copy(), (t,), backward_fn)


def reshape(t: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if int(np.prod(shape, dtype=np.int64)) != t.numel:
        raise ShapeError(f"reshape: cannot view {t.shape} as {shape}")

    def backward_fn(out: Tensor) -> None:
        _acc(t, out.grad.reshape(t.shape))

    return _out(t.values.reshape(shape).copy(), (t,), backward_fn)


# ---------------------------------------------------------------------------
# elementwise binary


def add(a: Tensor, b: Tensor) -> Tensor:
    _need_same_shape(a, b, "add")

    def backward_fn(out: Tensor) -> None:
        _acc(a, out.grad)
        _acc(b, out.grad)

    return _out(a.values + b.values, (a, b), backward_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _need_same_shape(a, b, "sub")

    def backward_fn(out: Tensor) -> None:
        _acc(a, out.grad)
        _acc(b, -out.grad)

    return _out(a.values - b.values, (a, b), backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _need_same_shape(a, b, "mul")

    def backward_fn(out: Tensor) -> None:
        _acc(a, out.grad * b.values)
        _acc(b, out.grad * a.values)

    return _out(a.values * b.values, (a, b), backward_fn)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; ties route the gradient to the first argument."""
    _need_same_shape(a, b, "maximum")
    take_a = a.values >= b.values

    def backward_fn(out: Tensor) -> None:
        _acc(a, out.grad * take_a)
        _acc(b, out.grad * ~take_a)

    return _out(np.where(take_a, a.values, b.values), (a, b), backward_fn)


def neg(t: Tensor) -> Tensor:
    def backward_fn(out: Tensor) -> None:
        _acc(t, -out.grad)

    return _out(-t.values, (t,), backward_fn)


def add_scalar(t: Tensor, c: float) -> Tensor:
    def backward_fn(out: Tensor) -> None:
        _acc(t, out.grad)

    return _out(t.values + float(c), (t,), backward_fn)


def mul_scalar(t: Tensor, c: float) -> Tensor:
    c = float(c)

    def backward_fn(out: Tensor) -> None:
        _acc(t, out.grad * c)

    return _out(t.values * c, (t,), backward_fn)


def smul(t: Tensor, s: Tensor) -> Tensor:
    """Product of a tensor with a one-element (typically trainable) scalar."""
    if s.numel != 1:
        raise ShapeError(f"smul scale must have one element, got shape {s.shape}")
    s_val = float(s.values.reshape(()))

    def backward_fn(out: Tensor) -> None:
        _acc(t, out.grad * s_val)
        _acc(s, np.sum(out.grad * t.values).reshape(s.shape))

    return _out(t.values * s_val, (t, s), backward_fn)


# ---------------------------------------------------------------------------
# elementwise unary


def sigmoid(t: Tensor) -> Tensor:
    x = t.values
    out_values = np.empty_like(x)
    pos = x >= 0
    out_values[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_values[~pos] = ex / (1.0 + ex)

    def backward_fn(out: Tensor) -> None:
        _acc(t, out.grad * out.values * (1.0 - out.values))

    return _out(out_values, (t,), backward_fn)


def tanh(t: Tensor) -> Tensor:
    out_values = np.tanh(t.values)

    def backward_fn(out: Tensor) -> None:
        _acc(t, out.grad * (1.0 - out.values * out.values))

    return _out(out_values, (t,), backward_fn)


def relu(t: Tensor) -> Tensor:
    mask = t.values > 0

    def backward_fn(out: Tensor) -> None:
        _acc(t, out.grad * mask)

    return _out(np.where(mask, t.values, 0.0), (t,), backward_fn)


def gelu(t: Tensor) -> Tensor:
    x = t.values
    inner = _SQRT_2_OVER_PI * (x + _GELU_C * x**3)
    th = np.tanh(inner)
    out_values = 0.5 * x * (1.0 + th)

    def backward_fn(out: Tensor) -> None:
        d_inner = _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_C * x * x)
        local = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * d_inner
        _acc(t, out.grad * local)

    return _out(out_values, (t,), backward_fn)


def softsign(t: Tensor) -> Tensor:
    denom = 1.0 + np.abs(t.values)

    def backward_fn(out: Tensor) -> None:
        _acc(t, out.grad / (denom * denom))

    return _out(t.values / denom, (t,), backward_fn)


def absolute(t: Tensor) -> Tensor:
    sign = np.sign(t.values)

    def backward_fn(out: Tensor) -> None:
        _acc(t, out.grad * sign)

    return _out(np.abs(t.values), (t,), backward_fn)


def log(t: Tensor) -> Tensor:
    if np.any(t.values <= 0):
        raise DomainError("log requires strictly positive values")

    def backward_fn(out: Tensor) -> None:
        _acc(t, out.grad / t.values)

    return _out(np.log(t.values), (t,), backward_fn)


def clamp(t: Tensor, lo: float, hi: float) -> Tensor:
    if not lo < hi:
        raise ConfigError(f"clamp needs lo < hi, got [{lo}, {hi}]")
    inside = (t.values >= lo) & (t.values <= hi)

    def backward_fn(out: Tensor) -> None:
        _acc(t, out.grad * inside)

    return _out(np.clip(t.values, lo, hi), (t,), backward_fn)


# ---------------------------------------------------------------------------
# reductions, softmax, concatenation


def _check_axis(t: Tensor, axis: int, op: str) -> None:
    if not 0 <= axis < t.values.ndim:
        raise DomainError(f"{op}: axis {axis} out of range for shape {t.shape}")
    if t.shape[axis] == 0:
        raise DomainError(f"{op}: axis {axis} of shape {t.shape} is empty")


def reduce_sum(t: Tensor, axis: int | None = None) -> Tensor:
    if axis is None:
        def backward_fn(out: Tensor) -> None:
            _acc(t, np.broadcast_to(out.grad, t.shape).copy())

        return _out(np.sum(t.values).reshape(()), (t,), backward_fn)
    _check_axis(t, axis, "reduce_sum")

    def backward_fn(out: Tensor) -> None:
        _acc(t, np.broadcast_to(np.expand_dims(out.grad, axis), t.shape).copy())

    return _out(np.sum(t.values, axis=axis), (t,), backward_fn)


def reduce_mean(t: Tensor, axis: int | None = None) -> Tensor:
    if axis is None:
        n = t.numel
        if n == 0:
            raise DomainError("reduce_mean of an empty tensor")

        def backward_fn(out: Tensor) -> None:
            _acc(t, np.broadcast_to(out.grad / n, t.shape).copy())

        return _out(np.mean(t.values).reshape(()), (t,), backward_fn)
    _check_axis(t, axis, "reduce_mean")
    n = t.shape[axis]

    def backward_fn(out: Tensor) -> None:
        _acc(t, np.broadcast_to(np.expand_dims(out.grad / n, axis), t.shape).copy())

    return _out(np.mean(t.values, axis=axis), (t,), backward_fn)


def reduce_max(t: Tensor, axis: int | None = None) -> Tensor:
    """Max reduction; the gradient flows to the first (lowest-index) argmax."""
    if axis is None:
        flat_idx = int(np.argmax(t.values))

        def backward_fn(out: Tensor) -> None:
            g = np.zeros_like(t.values)
            g.reshape(-1)[flat_idx] = float(out.grad.reshape(()))
            _acc(t, g)

        return _out(np.max(t.values).reshape(()), (t,), backward_fn)
    _check_axis(t, axis, "reduce_max")
    idx = np.expand_dims(np.argmax(t.values, axis=axis), axis)

    def backward_fn(out: Tensor) -> None:
        g = np.zeros_like(t.values)
        np.put_along_axis(g, idx, np.expand_dims(out.grad, axis), axis=axis)
        _acc(t, g)

    return _out(np.max(t.values, axis=axis), (t,), backward_fn)


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    if axis < 0:
        axis += t.values.ndim
    _check_axis(t, axis, "softmax")
    shifted = t.values - np.max(t.values, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_values = e / np.sum(e, axis=axis, keepdims=True)

    def backward_fn(out: Tensor) -> None:
        y, g = out.values, out.grad
        _acc(t, y * (g - np.sum(g * y, axis=axis, keepdims=True)))

    return _out(out_values, (t,), backward_fn)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat of an empty tensor list")
    rank = tensors[0].values.ndim
    if not 0 <= axis < rank:
        raise DomainError(f"concat: axis {axis} out of range for rank {rank}")
    ref = list(tensors[0].shape)
    for i, t in enumerate(tensors[1:], start=1):
        cand = list(t.shape)
        if t.values.ndim != rank or cand[:axis] + cand[axis + 1:] != ref[:axis] + ref[axis + 1:]:
            raise ShapeError(
                f"concat: tensor {i} has shape {t.shape}, incompatible with {tensors[0].shape} on axis {axis}"
            )
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(out: Tensor) -> None:
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * rank
            sl[axis] = slice(start, stop)
            _acc(t, out.grad[tuple(sl)])

    return _out(np.concatenate([t.values for t in tensors], axis=axis), tuple(tensors), backward_fn)


# ---------------------------------------------------------------------------
# structured broadcasts and slices


def tile_rows(v: Tensor, k: int) -> Tensor:
    """Repeat a 1-D vector as k identical rows; gradient sums over rows."""
    if v.values.ndim != 1:
        raise ShapeError(f"tile_rows needs a 1-D vector, got {v.shape}")
    if k < 1:
        raise ShapeError(f"tile_rows needs k >= 1, got {k}")

    def backward_fn(out: Tensor) -> None:
        _acc(v, out.grad.sum(axis=0))

    return _out(np.broadcast_to(v.values, (k, v.shape[0])).copy(), (v,), backward_fn)


def scale_rows(x: Tensor, s: Tensor) -> Tensor:
    """Multiply each row of (R,C) x by the matching entry of (R,1) s."""
    if x.values.ndim != 2 or s.shape != (x.shape[0], 1):
        raise ShapeError(f"scale_rows: x {x.shape} needs s of shape ({x.shape[0]}, 1), got {s.shape}")

    def backward_fn(out: Tensor) -> None:
        _acc(x, out.grad * s.values)
        _acc(s, np.sum(out.grad * x.values, axis=1, keepdims=True))

    return _out(x.values * s.values, (x, s), backward_fn)


def row_slice(t: Tensor, start: int, stop: int) -> Tensor:
    if t.values.ndim != 2 or not 0 <= start < stop <= t.shape[0]:
        raise ShapeError(f"row_slice [{start}:{stop}] invalid for shape {t.shape}")

    def backward_fn(out: Tensor) -> None:
        g = np.zeros_like(t.values)
        g[start:stop] = out.grad
        _acc(t, g)

    return _out(t.values[start:stop].copy(), (t,), backward_fn)


def col_slice(t: Tensor, start: int, stop: int) -> Tensor:
    if t.values.ndim != 2 or not 0 <= start < stop <= t.shape[1]:
        raise ShapeError(f"col_slice [{start}:{stop}] invalid for shape {t.shape}")

    def backward_fn(out: Tensor) -> None:
        g = np.zeros_like(t.values)
        g[:, start:stop] = out.grad
        _acc(t, g)

    return _out(t.values[:, start:stop].copy(), (t,), backward_fn)


# ---------------------------------------------------------------------------
# composite primitives with bespoke gradients


def l2_normalize_rows(t: Tensor) -> Tensor:
    """Scale each row to unit L2 norm; all-zero rows stay zero."""
    if t.values.ndim != 2:
        raise ShapeError(f"l2_normalize_rows needs a 2-D tensor, got {t.shape}")
    norms = np.linalg.norm(t.values, axis=1, keepdims=True)
    nonzero = norms > 0.0
    safe = np.where(nonzero, norms, 1.0)
    out_values = np.where(nonzero, t.values / safe, 0.0)

    def backward_fn(out: Tensor) -> None:
        y, g = out.values, out.grad
        inner = np.sum(g * y, axis=1, keepdims=True)
        _acc(t, np.where(nonzero, (g - y * inner) / safe, 0.0))

    return _out(out_values, (t,), backward_fn)


def layer_norm_rows(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row standardisation followed by an affine map with 1-D gain/bias."""
    if x.values.ndim != 2:
        raise ShapeError(f"layer_norm_rows needs a 2-D tensor, got {x.shape}")
    width = x.shape[1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise ShapeError(
            f"layer_norm_rows: gain {gain.shape} / bias {bias.shape} must both be ({width},)"
        )
    mu = np.mean(x.values, axis=1, keepdims=True)
    var = np.var(x.values, axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.values - mu) * inv
    out_values = xhat * gain.values + bias.values

    def backward_fn(out: Tensor) -> None:
        g = out.grad
        _acc(gain, np.sum(g * xhat, axis=0))
        _acc(bias, np.sum(g, axis=0))
        dxhat = g * gain.values
        mean_d = np.mean(dxhat, axis=1, keepdims=True)
        mean_dx = np.mean(dxhat * xhat, axis=1, keepdims=True)
        _acc(x, (dxhat - mean_d - xhat * mean_dx) * inv)

    return _out(out_values, (x, gain, bias), backward_fn)


def cosine_rows(a: Tensor, b: Tensor) -> Tensor:
    """Row-wise cosine similarity, (R,C)x(R,C) -> (R,1).

    A row whose vector is exactly zero on either side yields similarity 0
    and propagates no gradient, which is the convention used for absent
    modalities.
    """
    _need_same_shape(a, b, "cosine_rows")
    if a.values.ndim != 2:
        raise ShapeError(f"cosine_rows needs 2-D tensors, got {a.shape}")
    na = np.linalg.norm(a.values, axis=1, keepdims=True)
    nb = np.linalg.norm(b.values, axis=1, keepdims=True)
    ok = (na > 0.0) & (nb > 0.0)
    safe_a = np.where(ok, na, 1.0)
    safe_b = np.where(ok, nb, 1.0)
    dots = np.sum(a.values * b.values, axis=1, keepdims=True)
    cos = np.where(ok, dots / (safe_a * safe_b), 0.0)

    def backward_fn(out: Tensor) -> None:
        g = out.grad
        da = np.where(ok, g * (b.values / (safe_a * safe_b) - cos * a.values / (safe_a * safe_a)), 0.0)
        db = np.where(ok, g * (a.values / (safe_a * safe_b) - cos * b.values / (safe_b * safe_b)), 0.0)
        _acc(a, da)
        _acc(b, db)

    return _out(cos, (a, b), backward_fn)


def stop_gradient(t: Tensor) -> Tensor:
    """A constant copy of t: forward value passes, gradient does not."""
    return Tensor(t.values.copy())


# ---------------------------------------------------------------------------
# name-based dispatch (search-space registries enumerate ops by name)

_ELEMENTWISE = {
    "add": add,
    "mul": mul,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": relu,
    "gelu": gelu,
    "softsign": softsign,
}

_REDUCE = {"sum": reduce_sum, "mean": reduce_mean, "max": reduce_max}


def elementwise(op: str, *inputs: Tensor) -> Tensor:
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise DomainError(f"unknown elementwise op {op!r}") from None
    return fn(*inputs)


def reduce(op: str, t: Tensor, axis: int | None = None) -> Tensor:
    try:
        fn = _REDUCE[op]
    except KeyError:
        raise DomainError(f"unknown reduction {op!r}") from None
    return fn(t, axis)


# ---------------------------------------------------------------------------
# backward pass


def _topo_order(loss: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, emitted = stack.pop()
        if emitted:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Populate .grad on every requires_grad tensor reachable from loss."""
    if loss.numel != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise GraphError("loss is not connected to any tensor that requires gradients")
    order = _topo_order(loss)
    for node in order:
        if node.grad is not None:
            raise GraphError(
                "backward called while gradients from a previous pass are still set; "
                "reset them first (zero_grads)"
            )
    loss.grad = np.ones_like(loss.values)
    for node in reversed(order):
        node._visits += 1
        if node._backward is not None and node.grad is not None:
            node._backward(node)


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


# ---------------------------------------------------------------------------
# optimizers


class SGD:
    """Plain stochastic gradient descent with optional L2 weight decay."""

    def __init__(self, params: Sequence[Tensor], lr: float, weight_decay: float = 0.0):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.values
            p.values -= self.lr * g


class Adam:
    """Adam with bias correction; moments are kept per parameter."""

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self._m = [np.zeros_like(p.values) for p in self.params]
        self._v = [np.zeros_like(p.values) for p in self.params]
        self._t = 0

    def step(self) -> None:
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.values
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1**self._t)
            v_hat = v / (1 - b2**self._t)
            p.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(method: str, params: Sequence[Tensor], lr: float, **kwargs):
    if method == "sgd":
        return SGD(params, lr, weight_decay=kwargs.get("weight_decay", 0.0))
    if method == "adam":
        return Adam(
            params,
            lr,
            betas=kwargs.get("betas", (0.9, 0.999)),
            eps=kwargs.get("eps", 1e-8),
            weight_decay=kwargs.get("weight_decay", 0.0),
        )
    raise ConfigError(f"unknown optimizer {method!r} (expected 'sgd' or 'adam')")
