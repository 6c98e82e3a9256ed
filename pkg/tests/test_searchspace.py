from __future__ import annotations

import numpy as np
import pytest

import muse.autograd as ag
from muse.errors import RegistryError
from muse.searchspace import (
    FUSION_NAMES,
    KINDS,
    LINEAR_TRANSFORM_NAMES,
    SEQ_TRANSFORM_NAMES,
    instantiate,
    matrix_from_positions,
    operator_names,
    operator_spec,
    positions_from_matrix,
)

D_H = 4


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _vec(seed, d=D_H):
    return ag.tensor(np.random.default_rng(seed).normal(size=(1, d)))


def _seq(seed, length=3, d=D_H, batch=1):
    g = np.random.default_rng(seed)
    return [ag.tensor(g.normal(size=(batch, d))) for _ in range(length)]


# ---------------------------------------------------------------------------
# registry


def test_registry_enumerates_names():
    assert operator_names("fusion") == FUSION_NAMES
    assert operator_names("linear_transform") == LINEAR_TRANSFORM_NAMES
    assert operator_names("seq_transform") == SEQ_TRANSFORM_NAMES


def test_registry_unknown_kind_and_name():
    with pytest.raises(RegistryError):
        operator_names("conv")
    with pytest.raises(RegistryError):
        instantiate("fusion", "Mean", D_H, 0, "x")
    with pytest.raises(RegistryError):
        operator_spec("linear_transform", "Swish", D_H)


def test_param_free_ops_declare_and_allocate_nothing():
    for kind, names in (
        ("fusion", ("Sum", "Max", "Average")),
        ("linear_transform", ("Sigmoid", "ReLU", "Tanh", "GELU", "Softsign", "Skip")),
        ("seq_transform", ("Skip",)),
    ):
        for name in names:
            assert operator_spec(kind, name, D_H).param_shapes == ()
            assert instantiate(kind, name, D_H, 0, "p").parameters() == {}


def test_param_shapes_match_allocated_parameters():
    for kind, names in (("fusion", FUSION_NAMES), ("linear_transform", LINEAR_TRANSFORM_NAMES),
                        ("seq_transform", SEQ_TRANSFORM_NAMES)):
        for name in names:
            spec = operator_spec(kind, name, D_H)
            op = instantiate(kind, name, D_H, 3, f"t.{name}")
            got = tuple(p.shape for p in op.parameters().values())
            assert sorted(got) == sorted(spec.param_shapes), (kind, name)


def test_same_seed_same_initial_parameters():
    a = instantiate("seq_transform", "GRU", D_H, 7, "edge")
    b = instantiate("seq_transform", "GRU", D_H, 7, "edge")
    for k in a.parameters():
        assert np.array_equal(a.parameters()[k].values, b.parameters()[k].values)
    c = instantiate("seq_transform", "GRU", D_H, 8, "edge")
    assert not np.array_equal(a.parameters()["edge.w_ih"].values, c.parameters()["edge.w_ih"].values)


# ---------------------------------------------------------------------------
# fusion operators


def test_sum_fusion():
    out = instantiate("fusion", "Sum", 2, 0, "f")(ag.tensor([1.0, 2.0]), ag.tensor([3.0, 4.0]))
    np.testing.assert_array_equal(out.values, [4.0, 6.0])


def test_max_fusion():
    out = instantiate("fusion", "Max", 2, 0, "f")(ag.tensor([1.0, 5.0]), ag.tensor([4.0, 2.0]))
    np.testing.assert_array_equal(out.values, [4.0, 5.0])


def test_average_fusion_idempotent():
    x = np.random.default_rng(0).normal(size=(2, D_H))
    out = instantiate("fusion", "Average", D_H, 0, "f")(ag.tensor(x), ag.tensor(x))
    np.testing.assert_array_equal(out.values, x)


def test_concat_fusion_output_width():
    op = instantiate("fusion", "Concat", D_H, 1, "f")
    out = op(_vec(1), _vec(2))
    assert out.shape == (1, D_H)
    v = op(ag.tensor(np.ones(D_H)), ag.tensor(np.ones(D_H)))
    assert v.shape == (D_H,)


def test_all_fusion_outputs_share_width():
    a, b = _vec(3), _vec(4)
    for name in FUSION_NAMES:
        out = instantiate("fusion", name, D_H, 5, f"f.{name}")(a, b)
        assert out.shape == (1, D_H), name


# ---------------------------------------------------------------------------
# linear transforms


def test_skip_is_identity():
    x = _vec(5)
    assert instantiate("linear_transform", "Skip", D_H, 0, "t")(x) is x


def test_relu_transform():
    out = instantiate("linear_transform", "ReLU", 2, 0, "t")(ag.tensor([-1.0, 2.0]))
    np.testing.assert_array_equal(out.values, [0.0, 2.0])


def test_mlp_identity_weights_on_zero_input():
    op = instantiate("linear_transform", "MLP", 1, 0, "t")
    op.fc1.weight.values[:] = np.eye(1)
    op.fc1.bias.values[:] = 0.0
    op.fc2.weight.values[:] = np.eye(1)
    op.fc2.bias.values[:] = 0.0
    out = op(ag.tensor([0.0]))
    np.testing.assert_array_equal(out.values, [0.5])


def test_transforms_preserve_shape():
    for name in LINEAR_TRANSFORM_NAMES:
        for shape in [(D_H,), (3, D_H)]:
            x = ag.tensor(np.random.default_rng(0).normal(size=shape))
            out = instantiate("linear_transform", name, D_H, 2, f"t.{name}")(x)
            assert out.shape == shape, name


# ---------------------------------------------------------------------------
# sequence transforms: gate-equation oracles (independent numpy loops)


def _oracle_rnn(xs, w_ih, b_ih, w_hh, b_hh):
    h = np.zeros((xs[0].shape[0], w_hh.shape[0]))
    out = []
    for x in xs:
        h = np.tanh(x @ w_ih + b_ih + h @ w_hh + b_hh)
        out.append(h.copy())
    return out


def _oracle_lstm(xs, w_ih, b_ih, w_hh, b_hh):
    d = w_hh.shape[0]
    h = np.zeros((xs[0].shape[0], d))
    c = np.zeros_like(h)
    out = []
    for x in xs:
        pre = x @ w_ih + b_ih + h @ w_hh + b_hh
        i, f, g, o = (pre[:, 0:d], pre[:, d:2 * d], pre[:, 2 * d:3 * d], pre[:, 3 * d:4 * d])
        i, f, o = _sigmoid(i), _sigmoid(f), _sigmoid(o)
        g = np.tanh(g)
        c = f * c + i * g
        h = o * np.tanh(c)
        out.append(h.copy())
    return out


def _oracle_gru(xs, w_ih, b_ih, w_hh, b_hh):
    d = w_hh.shape[0]
    h = np.zeros((xs[0].shape[0], d))
    out = []
    for x in xs:
        gi = x @ w_ih + b_ih
        gh = h @ w_hh + b_hh
        r = _sigmoid(gi[:, 0:d] + gh[:, 0:d])
        z = _sigmoid(gi[:, d:2 * d] + gh[:, d:2 * d])
        n = np.tanh(gi[:, 2 * d:3 * d] + r * gh[:, 2 * d:3 * d])
        h = (1.0 - z) * n + z * h
        out.append(h.copy())
    return out


_ORACLES = {"RNN": _oracle_rnn, "LSTM": _oracle_lstm, "GRU": _oracle_gru}


@pytest.mark.parametrize("name", ["RNN", "LSTM", "GRU"])
@pytest.mark.parametrize("length", [1, 2, 4])
def test_recurrent_matches_gate_oracle(name, length):
    op = instantiate("seq_transform", name, D_H, 11, f"e.{name}")
    xs = _seq(13 + length, length=length, batch=2)
    got = op(xs)
    expect = _ORACLES[name](
        [x.values for x in xs],
        op.w_ih.values, op.b_ih.values, op.w_hh.values, op.b_hh.values,
    )
    for g, e in zip(got, expect):
        np.testing.assert_allclose(g.values, e, rtol=0, atol=1e-12)


def test_lstm_single_step_1x2_oracle():
    op = instantiate("seq_transform", "LSTM", 2, 21, "e.lstm")
    x = ag.tensor([[0.3, -0.7]])
    got = op([x])[0].values
    expect = _oracle_lstm([x.values], op.w_ih.values, op.b_ih.values, op.w_hh.values, op.b_hh.values)[0]
    np.testing.assert_allclose(got, expect, rtol=0, atol=1e-12)


def test_gru_zero_weights_zero_fixed_point():
    op = instantiate("seq_transform", "GRU", D_H, 0, "e.gru")
    for p in op.parameters().values():
        p.values[:] = 0.0
    out = op(_seq(1, length=3))
    for o in out:
        np.testing.assert_array_equal(o.values, np.zeros((1, D_H)))


def test_seq_skip_identity():
    xs = _seq(2, length=3)
    out = instantiate("seq_transform", "Skip", D_H, 0, "e")(xs)
    for a, b in zip(out, xs):
        assert a is b


def test_transformer_preserves_shape_and_is_deterministic():
    op = instantiate("seq_transform", "Transformer", D_H, 5, "e.tr")
    xs = _seq(9, length=3, batch=2)
    out1 = op(xs)
    out2 = op(xs)
    assert len(out1) == 3
    for a, b in zip(out1, out2):
        assert a.shape == (2, D_H)
        assert np.array_equal(a.values, b.values)


def test_transformer_attention_rows_mix_positions():
    # moving one position changes every output position (dense attention)
    op = instantiate("seq_transform", "Transformer", D_H, 6, "e.tr")
    xs = _seq(10, length=3)
    base = [o.values.copy() for o in op(xs)]
    xs2 = [ag.tensor(x.values.copy()) for x in xs]
    xs2[2] = ag.tensor(xs2[2].values + 1.0)
    moved = [o.values for o in op(xs2)]
    for b, m in zip(base, moved):
        assert not np.array_equal(b, m)


def test_transformer_gradients_flow_to_all_parameters():
    op = instantiate("seq_transform", "Transformer", D_H, 7, "e.tr")
    xs = _seq(11, length=2, batch=2)
    out = op(xs)
    loss = ag.reduce_sum(ag.add(out[0], out[1]))
    ag.backward(loss)
    for name, p in op.parameters().items():
        assert p.grad is not None, name


def test_positions_matrix_roundtrip():
    m = np.arange(12.0).reshape(3, 4)
    ps = positions_from_matrix(m)
    assert len(ps) == 3 and ps[0].shape == (1, 4)
    np.testing.assert_array_equal(matrix_from_positions(ps), m)


# ---------------------------------------------------------------------------
# randomized finiteness sweep (1000 trials per operator)


@pytest.mark.parametrize("kind,name", [("fusion", n) for n in FUSION_NAMES]
                         + [("linear_transform", n) for n in LINEAR_TRANSFORM_NAMES]
                         + [("seq_transform", n) for n in SEQ_TRANSFORM_NAMES])
def test_operator_outputs_finite_on_random_inputs(kind, name):
    g = np.random.default_rng(hash(name) % 2**32)
    with ag.no_grad():
        for trial in range(1000):
            d = int(g.integers(1, 5))
            op = instantiate(kind, name, d, int(trial % 17), f"fin.{name}")
            if kind == "fusion":
                out = op(ag.tensor(g.normal(size=(2, d)) * 10), ag.tensor(g.normal(size=(2, d)) * 10))
                vals = [out.values]
            elif kind == "linear_transform":
                vals = [op(ag.tensor(g.normal(size=(2, d)) * 10)).values]
            else:
                length = int(g.integers(1, 4))
                vals = [o.values for o in op([ag.tensor(g.normal(size=(2, d)) * 10) for _ in range(length)])]
            for v in vals:
                assert np.all(np.isfinite(v))
