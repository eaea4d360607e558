"""Tape autodiff and primitive gradients against central differences.

Every primitive gets a finite-difference comparison at points kept away from
kinks (relu at 0, L1 at equality) so the numeric derivative is trustworthy.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from melgraph import ops
from melgraph.errors import NonScalarLoss, ShapeMismatch
from melgraph.params import ParamStore, fd_check, fd_report
from melgraph.tensor import Tape, Tensor, backward, constant


def fd_single(build_loss, value, eps=1e-6):
    """Max FD error for a loss that consumes one parameter tensor."""
    store = ParamStore()
    store.add("x", np.asarray(value, dtype=np.float64))
    return fd_check(lambda p: build_loss(p["x"]), store, eps=eps)


# ---------------------------------------------------------------- tape basics

def test_sum_gradient_is_ones():
    w = Tensor(np.array([1.0, 5.0, -2.0]), requires_grad=True)
    with Tape() as tape:
        loss = ops.sum(w)
    backward(loss, tape)
    assert w.grad.tolist() == [1.0, 1.0, 1.0]


def test_quadratic_gradient_hand_value():
    w = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    with Tape() as tape:
        loss = ops.sum(ops.mul(w, w))
    backward(loss, tape)
    assert w.grad.tolist() == [2.0, 4.0]
    assert loss.item() == 5.0


def test_backward_rejects_non_scalar():
    w = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    with Tape() as tape:
        y = ops.mul(w, w)
    with pytest.raises(NonScalarLoss):
        backward(y, tape)


def test_no_recording_outside_tape():
    w = Tensor(np.array([1.0]), requires_grad=True)
    with Tape() as tape:
        pass
    y = ops.mul(w, w)  # outside the with-block
    assert len(tape) == 0
    assert y.item() == 1.0


def test_constants_not_recorded():
    c = constant(np.array([2.0]))
    with Tape() as tape:
        ops.mul(c, c)
    assert len(tape) == 0


def test_gradient_accumulates_across_uses():
    w = Tensor(np.array([3.0]), requires_grad=True)
    with Tape() as tape:
        loss = ops.add(ops.mul(w, w), ops.mul(w, constant(np.array([4.0]))))
    backward(loss, tape)
    assert w.grad.tolist() == [10.0]  # 2w + 4


def test_intermediate_grads_freed_by_default():
    w = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
    store = ParamStore()
    store.add("w", w.data)
    with Tape() as tape:
        mid = ops.tanh(store["w"])
        loss = ops.sum(mid)
    backward(loss, tape, params=store)
    assert mid.grad is None
    assert store["w"].grad is not None


def test_intermediate_grads_kept_on_request():
    store = ParamStore()
    store.add("w", np.array([[1.0, 2.0]]))
    with Tape() as tape:
        mid = ops.tanh(store["w"])
        loss = ops.sum(mid)
    backward(loss, tape, params=store, free_intermediates=False)
    expected = 1.0 - np.tanh([[1.0, 2.0]]) ** 2
    np.testing.assert_allclose(mid.grad, np.ones((1, 2)))
    np.testing.assert_allclose(store["w"].grad, expected)


def test_nested_tapes_are_rejected_cleanly():
    with Tape():
        with Tape() as inner:
            w = Tensor(np.array([2.0]), requires_grad=True)
            loss = ops.mul(w, w)
        backward(loss, inner)
    assert w.grad.tolist() == [4.0]


# ---------------------------------------------------------------- shape errors

def test_shape_errors_report_both_shapes():
    a = constant(np.zeros((2, 3)))
    b = constant(np.zeros((2, 3)))
    with pytest.raises(ShapeMismatch) as err:
        ops.matmul(a, b)
    assert "(2, 3)" in str(err.value)
    with pytest.raises(ShapeMismatch):
        ops.add(constant(np.zeros((2, 2))), constant(np.zeros((3, 2))))
    with pytest.raises(ShapeMismatch):
        ops.mul(constant(np.zeros(2)), constant(np.zeros(3)))
    with pytest.raises(ShapeMismatch):
        ops.concat((constant(np.zeros((2, 2))), constant(np.zeros((2, 3)))), axis=0)


# ---------------------------------------------------------------- FD per primitive

def test_fd_matmul():
    rng = np.random.default_rng(2)
    a = rng.uniform(-1, 1, (3, 4))
    b = constant(rng.uniform(-1, 1, (4, 2)))
    assert fd_single(lambda x: ops.sum(ops.matmul(x, b)), a) < 1e-8


def test_fd_matmul_right_operand():
    rng = np.random.default_rng(3)
    a = constant(rng.uniform(-1, 1, (3, 4)))
    b = rng.uniform(-1, 1, (4, 2))
    assert fd_single(lambda x: ops.sum(ops.matmul(a, x)), b) < 1e-8


def test_fd_bias_add():
    rng = np.random.default_rng(4)
    m = constant(rng.uniform(-1, 1, (3, 5)))
    bias = rng.uniform(-1, 1, 5)
    assert fd_single(lambda x: ops.sum(ops.tanh(ops.add(m, x))), bias) < 1e-8


def test_fd_sub_mul():
    rng = np.random.default_rng(5)
    x = rng.uniform(0.5, 1.5, (2, 3))
    c = constant(rng.uniform(-1, 1, (2, 3)))
    assert fd_single(lambda t: ops.sum(ops.mul(ops.sub(t, c), t)), x) < 1e-8


def test_fd_transpose_reshape():
    rng = np.random.default_rng(6)
    x = rng.uniform(-1, 1, (2, 6))
    c = constant(rng.uniform(-1, 1, (3, 4)))
    assert fd_single(
        lambda t: ops.sum(ops.mul(ops.reshape(ops.transpose(t), (3, 4)), c)), x
    ) < 1e-8


def test_fd_concat_slice():
    rng = np.random.default_rng(7)
    x = rng.uniform(-1, 1, (4, 3))

    def loss(t):
        top = ops.slice_axis(t, 0, 0, 2)
        bottom = ops.slice_axis(t, 0, 2, 4)
        return ops.sum(ops.mul(ops.concat((bottom, top), axis=0), t))

    assert fd_single(loss, x) < 1e-8


def test_fd_sigmoid_tanh():
    rng = np.random.default_rng(8)
    x = rng.uniform(-2, 2, (3, 3))
    assert fd_single(lambda t: ops.sum(ops.sigmoid(t)), x) < 1e-8
    assert fd_single(lambda t: ops.sum(ops.tanh(t)), x) < 1e-8


def test_fd_relu_away_from_kink():
    rng = np.random.default_rng(9)
    x = rng.uniform(-2, 2, (4, 4))
    x[np.abs(x) < 0.1] = 0.5  # keep the eps-ball clear of the kink
    c = constant(rng.uniform(-1, 1, (4, 4)))
    assert fd_single(lambda t: ops.sum(ops.mul(ops.relu(t), c)), x) < 1e-8


def test_fd_softmax_both_axes():
    rng = np.random.default_rng(10)
    x = rng.uniform(-1, 1, (4, 3))
    c = constant(rng.uniform(-1, 1, (4, 3)))
    for axis in (0, 1):
        err = fd_single(lambda t: ops.sum(ops.mul(ops.softmax(t, axis=axis), c)), x)
        assert err < 1e-7


def test_fd_mean():
    rng = np.random.default_rng(11)
    # entries bounded away from 0 so no per-entry gradient is tiny enough
    # for FD roundoff to dominate its relative error
    x = rng.choice([-1, 1], (3, 4)) * rng.uniform(0.2, 1.0, (3, 4))
    assert fd_single(lambda t: ops.mean(ops.mul(t, t)), x) < 1e-8


def test_fd_l1_loss_away_from_equality():
    rng = np.random.default_rng(12)
    target = constant(rng.uniform(0, 1, (3, 4)))
    pred = target.data + rng.choice([-1, 1], (3, 4)) * rng.uniform(0.1, 0.5, (3, 4))
    assert fd_single(lambda t: ops.l1_loss(t, target), pred) < 1e-8


def test_fd_bce_loss():
    rng = np.random.default_rng(13)
    logits = rng.uniform(-3, 3, (5, 1))
    targets = constant(rng.integers(0, 2, (5, 1)).astype(np.float64))
    assert fd_single(lambda t: ops.bce_loss(t, targets), logits) < 1e-8


# ---------------------------------------------------------------- op semantics

def test_bce_matches_hand_computation():
    logits = constant(np.array([[0.0], [2.0], [-1.0]]))
    targets = constant(np.array([[1.0], [0.0], [1.0]]))
    p = 1 / (1 + np.exp(-logits.data))
    expected = float(
        np.mean(-(targets.data * np.log(p) + (1 - targets.data) * np.log(1 - p)))
    )
    assert abs(ops.bce_loss(logits, targets).item() - expected) < 1e-12


def test_bce_stable_at_extreme_logits():
    logits = constant(np.array([[1000.0], [-1000.0]]))
    targets = constant(np.array([[1.0], [0.0]]))
    assert ops.bce_loss(logits, targets).item() < 1e-9
    flipped = constant(np.array([[0.0], [1.0]]))
    assert np.isfinite(ops.bce_loss(logits, flipped).item())


def test_sigmoid_stable_at_extremes():
    x = constant(np.array([[800.0, -800.0]]))
    y = ops.sigmoid(x).data
    assert np.all(np.isfinite(y))
    assert y[0, 0] == pytest.approx(1.0)
    assert y[0, 1] == pytest.approx(0.0)


def test_l1_hand_value():
    a = constant(np.array([[1.0, 2.0], [3.0, 4.0]]))
    b = constant(np.array([[1.5, 2.0], [2.0, 6.0]]))
    assert ops.l1_loss(a, b).item() == pytest.approx((0.5 + 0 + 1 + 2) / 4)


@settings(max_examples=40)
@given(
    st.integers(min_value=1, max_value=5),
    st.integers(min_value=1, max_value=5),
    st.integers(min_value=0, max_value=2 ** 31 - 1),
)
def test_softmax_rows_are_distributions(n, m, seed):
    x = np.random.default_rng(seed).normal(0, 5, (n, m))
    y = ops.softmax(constant(x), axis=1).data
    assert y.min() >= 0
    np.testing.assert_allclose(y.sum(axis=1), np.ones(n), atol=1e-12)
    y0 = ops.softmax(constant(x), axis=0).data
    np.testing.assert_allclose(y0.sum(axis=0), np.ones(m), atol=1e-12)


def test_trivial_identities():
    np.testing.assert_array_equal(
        ops.softmax(constant(np.array([[0.0, 0.0]])), axis=1).data, [[0.5, 0.5]]
    )
    x = constant(np.array([[3.0], [0.5]]))
    np.testing.assert_array_equal(ops.matmul(constant(np.eye(2)), x).data, x.data)
    np.testing.assert_array_equal(
        ops.matmul(constant(np.array([[1.0, 1.0], [0.0, 1.0]])),
                   constant(np.array([[1.0], [0.0]]))).data,
        [[1.0], [0.0]],
    )


def test_slice_axis_copies():
    x = constant(np.arange(6.0).reshape(2, 3))
    s = ops.slice_axis(x, 1, 1, 3)
    assert s.data.tolist() == [[1.0, 2.0], [4.0, 5.0]]
    s.data[0, 0] = 99.0
    assert x.data[0, 1] == 1.0


# ---------------------------------------------------------------- fd_check oracle

def test_fd_check_quadratic_tight():
    store = ParamStore()
    store.add("w", np.array([0.3, -1.2, 2.0]))
    err = fd_check(lambda p: ops.sum(ops.mul(p["w"], p["w"])), store)
    assert err <= 1e-7


def test_fd_check_constant_loss_is_zero():
    store = ParamStore()
    store.add("w", np.array([1.0, 2.0]))
    c = constant(np.array([7.0]))
    assert fd_check(lambda p: ops.sum(ops.mul(c, c)), store) == 0.0


def test_fd_report_covers_every_parameter():
    store = ParamStore()
    store.add("a", np.array([1.0]))
    store.add("b", np.array([[2.0, 3.0]]))
    report = fd_report(lambda p: ops.add(ops.sum(p["a"]), ops.sum(p["b"])), store)
    assert set(report) == {"a", "b"}
