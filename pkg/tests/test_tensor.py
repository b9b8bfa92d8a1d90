import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from irlc.core import tensor as T
from irlc.core.checkpoint import CheckpointError, decode, encode
from irlc.core.gradcheck import gradcheck
from irlc.core.layers import (
    CE_CLAMP,
    GTU,
    LSTM,
    ParamStore,
    affine,
    cross_entropy,
    dropout,
    gtu_layer,
    huber,
    lstm_step,
    softmax_cross_entropy,
)
from irlc.core.optim import AdamState, ExponentialDecay, PlateauDecay, adam_step
from irlc.core.tensor import Parameter, backward, no_grad

TOL = 1e-4


def P(rng, *shape, name="x", low=-1.0, high=1.0):
    return Parameter(rng.uniform(low, high, size=shape), name=name)


def weighted(out, rng_seed=7):
    """A scalar that depends on every output entry with a distinct weight."""
    w = np.random.default_rng(rng_seed).normal(size=out.shape)
    return T.tsum(out * w)


def check(f, params, tol=TOL):
    errs = gradcheck(lambda: weighted(f()), params)
    assert max(errs.values()) < tol, errs


# --- finite-difference checks for every differentiable operation -----------------


@pytest.mark.parametrize(
    "op",
    [T.add, T.sub, T.mul, T.div],
    ids=["add", "sub", "mul", "div"],
)
def test_binary_ops_grad_with_broadcasting(op, rng):
    a = P(rng, 3, 4, name="a")
    b = P(rng, 4, name="b", low=0.5, high=1.5)
    check(lambda: op(a, b), [a, b])


@pytest.mark.parametrize(
    "op,low,high",
    [
        (T.exp, -2, 2),
        (T.log, 0.2, 3),
        (T.tanh, -2, 2),
        (T.sigmoid, -4, 4),
        (T.absolute, 0.1, 2),
        (T.relu, 0.1, 2),
        (lambda x: T.power(x, 3), -2, 2),
        (lambda x: T.power(x, 0.5), 0.3, 2),
    ],
    ids=["exp", "log", "tanh", "sigmoid", "abs", "relu", "cube", "sqrt"],
)
def test_unary_ops_grad(op, low, high, rng):
    x = P(rng, 5, 3, low=low, high=high)
    check(lambda: op(x), [x])


def test_abs_and_relu_negative_side_grad(rng):
    x = P(rng, 6, low=-2, high=-0.1)
    check(lambda: T.absolute(x) + T.relu(x) * 3.0, [x])


def test_reductions_and_shapes_grad(rng):
    x = P(rng, 2, 3, 4)
    check(lambda: T.tsum(x, axis=1), [x])
    check(lambda: T.tsum(x, axis=(0, 2), keepdims=True), [x])
    check(lambda: T.mean(x, axis=-1), [x])
    check(lambda: T.mean(x), [x])
    check(lambda: T.reshape(x, (6, 4)), [x])
    check(lambda: T.transpose(x, (2, 0, 1)), [x])
    check(lambda: T.swapaxes(x, 0, 2), [x])
    y = P(rng, 1, 4, name="y")
    check(lambda: T.broadcast_to(y, (3, 4)), [y])


def test_indexing_grad_accumulates_repeats(rng):
    x = P(rng, 5, 3)
    check(lambda: x[np.array([0, 2, 2, 4])], [x])
    check(lambda: x[1:4, ::2], [x])
    idx = np.array([[0, 2, 2], [1, 1, 0], [2, 0, 1], [0, 0, 0], [1, 2, 0]])
    check(lambda: T.take_along_axis(x, idx, axis=1), [x])


def test_concat_stack_where_grad(rng):
    a, b = P(rng, 2, 3, name="a"), P(rng, 2, 5, name="b")
    check(lambda: T.concat([a, b], axis=1), [a, b])
    c = P(rng, 2, 3, name="c")
    check(lambda: T.stack([a, c], axis=1), [a, c])
    cond = rng.random((2, 3)) > 0.5
    check(lambda: T.where(cond, a, c * 2.0), [a, c])


@pytest.mark.parametrize(
    "sa,sb",
    [((4,), (4,)), ((3, 4), (4,)), ((4,), (4, 2)), ((3, 4), (4, 2)), ((2, 3, 4), (4, 5)), ((2, 1, 3, 4), (5, 4, 2))],
)
def test_matmul_grad(sa, sb, rng):
    a, b = P(rng, *sa, name="a"), P(rng, *sb, name="b")
    check(lambda: T.matmul(a, b), [a, b])


def test_softmax_family_grad_with_mask(rng):
    x = P(rng, 3, 5, low=-3, high=3)
    mask = np.array([[1, 1, 0, 1, 1], [1, 0, 0, 0, 0], [1, 1, 1, 1, 1]], dtype=bool)
    check(lambda: T.softmax(x, axis=-1), [x])
    check(lambda: T.softmax(x, axis=-1, mask=mask), [x])
    check(lambda: T.log_softmax(x, axis=-1), [x])
    check(lambda: T.log_softmax(x, axis=-1, mask=mask), [x])
    check(lambda: T.log_softmax(x, axis=0), [x])


def test_affine_grad_tight(rng):
    x, W, b = P(rng, 5, name="x"), P(rng, 3, 5, name="W"), P(rng, 3, name="b")
    errs = gradcheck(lambda: weighted(affine(x, W, b)), [x, W, b])
    assert max(errs.values()) < 1e-6


def test_gtu_grad(rng):
    x = P(rng, 2, 4, name="x")
    params = [P(rng, 3, 4, name="W1"), P(rng, 3, name="b1"), P(rng, 3, 4, name="W2"), P(rng, 3, name="b2")]
    check(lambda: gtu_layer(x, params), [x, *params])


def test_lstm_step_grad_every_weight(rng):
    d, h = 3, 4
    x, h0, c0 = P(rng, d, name="x"), P(rng, h, name="h0"), P(rng, h, name="c0")
    params = [P(rng, 4 * h, d, name="Wx"), P(rng, 4 * h, h, name="Wh"), P(rng, 4 * h, name="b")]
    errs = gradcheck(lambda: weighted(T.concat(list(lstm_step(x, h0, c0, params)))), [x, h0, c0, *params])
    assert max(errs.values()) < 1e-5, errs


def test_lstm_run_with_lengths_grad(rng):
    store = ParamStore(rng)
    lstm = LSTM(store, "l", 3, 4)
    xs = [P(rng, 2, 3, name=f"x{t}") for t in range(3)]
    check(lambda: lstm.run(xs, np.array([3, 1])), list(store) + xs)


def test_losses_grad(rng):
    e = P(rng, 6, low=0.05, high=2.5)
    e.data[0] = 0.7  # one entry on each side of the knee
    e.data[1] = 1.6
    check(lambda: huber(e), [e])
    logits = P(rng, 4, 21, low=-2, high=2)
    target = np.array([0, 3, 20, 7])
    check(lambda: softmax_cross_entropy(logits, target), [logits])
    z = P(rng, 5, low=-1, high=1)
    check(lambda: cross_entropy(T.softmax(z), 2), [z])


def test_dropout_grad_with_fixed_mask(rng):
    x = P(rng, 4, 5)
    check(lambda: dropout(x, 0.3, True, np.random.default_rng(5)), [x])


# --- forward values ------------------------------------------------------------


def test_affine_examples():
    assert np.allclose(affine([1.0, 2.0], Parameter(np.eye(2)), Parameter(np.zeros(2))).data, [1, 2])
    assert affine([1.0, 1.0], Parameter([[2.0, 3.0]]), Parameter([-5.0])).data.tolist() == [0.0]
    with pytest.raises(ValueError):
        affine([1.0, 2.0, 3.0], Parameter(np.eye(2)), Parameter(np.zeros(2)))


def test_activation_examples():
    assert np.allclose(T.softmax(np.array([0.0, 0.0])).data, [0.5, 0.5])
    assert T.sigmoid(np.array(0.0)).item() == 0.5
    assert T.tanh(np.array(0.0)).item() == 0.0
    assert T.relu(np.array(-3.0)).item() == 0.0
    p = T.softmax(np.array([1000.0, 0.0])).data
    assert np.all(np.isfinite(p)) and abs(p[0] - 1) < 1e-12 and p[1] < 1e-12
    s = T.sigmoid(np.array([-1000.0, 1000.0])).data
    assert np.all(np.isfinite(s)) and s[0] == 0.0 and s[1] == 1.0


def test_masked_softmax_rows():
    x = np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
    mask = np.array([[True, False, True], [False, False, False]])
    p = T.softmax(x, mask=mask).data
    assert p[0, 1] == 0.0 and abs(p[0].sum() - 1) < 1e-12
    assert np.all(p[1] == 0.0)
    assert np.all(T.log_softmax(x, mask=mask).data[1] == 0.0)


def test_gtu_examples(rng):
    store = ParamStore(rng)
    g = GTU(store, "g", 3, 2)
    for p in store:
        p.data[...] = 0.0
    assert np.all(g(np.ones(3)).data == 0.0)
    big = [Parameter(np.full((1, 1), 50.0)), Parameter([0.0]), Parameter(np.full((1, 1), 50.0)), Parameter([0.0])]
    assert abs(gtu_layer(np.ones(1), big).item() - 1.0) < 1e-12
    closed = [Parameter(np.ones((1, 1))), Parameter([0.0]), Parameter(np.ones((1, 1))), Parameter([-1e4])]
    assert gtu_layer(np.ones(1), closed).item() == 0.0
    out = gtu_layer(rng.normal(size=(20, 3)) * 5, [P(rng, 2, 3), P(rng, 2), P(rng, 2, 3), P(rng, 2)]).data
    assert np.all(np.abs(out) < 1)


def test_lstm_zero_weights():
    params = [Parameter(np.zeros((8, 3))), Parameter(np.zeros((8, 2))), Parameter(np.zeros(8))]
    h, c = lstm_step(np.ones(3), np.zeros(2), np.zeros(2), params)
    assert np.all(h.data == 0) and np.all(c.data == 0)
    c_prev = np.array([0.8, -2.0])
    h, c = lstm_step(np.ones(3), np.zeros(2), c_prev, params)
    assert np.allclose(c.data, 0.5 * c_prev, atol=1e-15)
    assert np.allclose(h.data, 0.5 * np.tanh(0.5 * c_prev), atol=1e-15)
    with pytest.raises(ValueError):
        lstm_step(np.ones(3), np.zeros(3), np.zeros(2), params)


def test_huber_examples():
    assert huber(np.array(0.0)).item() == 0.0
    assert huber(np.array(1.0)).item() == 0.5
    assert huber(np.array(3.0)).item() == 2.5
    with pytest.raises(ValueError):
        huber(np.array(-0.1))


def test_huber_once_differentiable_at_knee():
    grads = []
    for v in (1.0 - 1e-9, 1.0 + 1e-9):
        e = Parameter(np.array(v))
        backward(huber(e))
        grads.append(e.grad.item())
    assert abs(grads[0] - grads[1]) < 1e-8


def test_cross_entropy_examples():
    assert cross_entropy(np.eye(21)[0], 0).item() == 0.0
    assert abs(cross_entropy(np.full(21, 1 / 21), 5).item() - np.log(21)) < 1e-12
    assert cross_entropy(np.eye(21)[0], 3).item() == CE_CLAMP
    with pytest.raises(IndexError):
        cross_entropy(np.full(3, 1 / 3), 3)


def test_cross_entropy_logit_grad_is_p_minus_onehot(rng):
    z = Parameter(rng.normal(size=21))
    backward(softmax_cross_entropy(z, np.array(4)))
    p = T.softmax(z.data).data
    assert np.allclose(z.grad, p - np.eye(21)[4], atol=1e-12)


# --- backward semantics ----------------------------------------------------------


def test_backward_outer_product_structure(rng):
    W = P(rng, 3, 4, name="W")
    x = rng.normal(size=4)
    backward(T.tsum(T.matmul(W, x)))
    assert np.allclose(W.grad, np.outer(np.ones(3), x), atol=1e-14)


def test_backward_unreached_grad_stays_zero(rng):
    a, b = P(rng, 3, name="a"), P(rng, 3, name="b")
    backward(T.tsum(a * 2.0))
    assert np.all(b.grad == 0)


def test_backward_twice_doubles_exactly(rng):
    a = P(rng, 4)
    loss = T.tsum(T.tanh(a) * a)
    backward(loss)
    once = a.grad.copy()
    backward(loss)
    assert np.array_equal(a.grad, 2 * once)


def test_backward_rejects_non_scalar(rng):
    with pytest.raises(ValueError):
        backward(P(rng, 3) * 2.0)


def test_no_grad_records_nothing(rng):
    a = P(rng, 3)
    with no_grad():
        out = T.tsum(a * a)
    assert not out.requires_grad
    backward(out)
    assert np.all(a.grad == 0)


def test_non_finite_forward_is_an_error():
    with pytest.raises(FloatingPointError):
        T.exp(np.array([1000.0]))
    with pytest.raises(FloatingPointError):
        T.log(np.array([0.0]))


# --- properties ---------------------------------------------------------------------

vectors = arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50))


@settings(max_examples=200, deadline=None)
@given(vectors, st.floats(-100, 100))
def test_softmax_sums_to_one_and_is_shift_invariant(x, c):
    p = T.softmax(x).data
    assert abs(p.sum() - 1) < 1e-12
    assert np.all((p >= 0) & (p <= 1))
    assert np.allclose(p, T.softmax(x + c).data, atol=1e-12, rtol=0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 10_000))
def test_backward_is_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    w = Parameter(rng.normal(size=(3, 3)), name="w")
    x = rng.normal(size=3)

    def grad_of(fn):
        w.zero_grad()
        backward(fn())
        return w.grad.copy()

    L1 = lambda: T.tsum(T.tanh(T.matmul(w, x)))
    L2 = lambda: T.tsum(T.sigmoid(w) * w)
    combo = grad_of(lambda: a * L1() + b * L2())
    assert np.allclose(combo, a * grad_of(L1) + b * grad_of(L2), atol=1e-10, rtol=0)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(-1e6, 1e6)))
def test_sigmoid_and_softmax_finite_on_finite_inputs(x):
    assert np.all(np.isfinite(T.sigmoid(x).data))
    assert np.all(np.isfinite(T.softmax(x).data))
    assert np.all(np.isfinite(T.log_softmax(x).data))


# --- optimisation ---------------------------------------------------------------------


def test_adam_zero_grad_leaves_params():
    p = Parameter(np.array([1.0, -2.0]), name="p")
    state = AdamState(lr=0.1)
    adam_step([p], state)
    assert p.data.tolist() == [1.0, -2.0] and state.step == 1


def test_adam_first_step_moves_by_lr():
    p = Parameter(np.array(3.0), name="p")
    p.grad[...] = 0.37
    state = AdamState(lr=1e-3)
    adam_step([p], state)
    assert abs((3.0 - p.data) - 1e-3) < 1e-8
    assert np.all(p.grad == 0)


def test_adam_step_counter_and_moment_shapes(rng):
    ps = [P(rng, 2, 3, name="a"), P(rng, 4, name="b")]
    state = AdamState()
    for k in range(3):
        for p in ps:
            p.grad[...] = 1.0
        adam_step(ps, state)
        assert state.step == k + 1
    assert state.m["a"].shape == (2, 3) and state.v["b"].shape == (4,)


def test_decay_changes_lr_not_moments():
    p = Parameter(np.array(1.0), name="p")
    state = AdamState(lr=1e-2)
    p.grad[...] = 1.0
    adam_step([p], state)
    m, v = state.m["p"].copy(), state.v["p"].copy()
    ExponentialDecay(state, 0.5).after_step()
    assert state.lr == 5e-3
    assert state.m["p"] == m and state.v["p"] == v


def test_plateau_decay_patience_one():
    state = AdamState(lr=1.0)
    sched = PlateauDecay(state, 0.8, patience=1)
    for acc in (0.1, 0.2, 0.2, 0.3, 0.25):
        sched.after_epoch(acc)
    assert abs(state.lr - 0.64) < 1e-15


# --- dropout ------------------------------------------------------------------------


def test_dropout_identities(rng):
    x = rng.normal(size=10)
    assert dropout(x, 0.0, True, rng) is x
    assert dropout(x, 0.7, False, rng) is x
    with pytest.raises(ValueError):
        dropout(x, 1.0, True, rng)


def test_dropout_monte_carlo(rng):
    x = np.ones(10**6)
    y = dropout(x, 0.5, True, rng).data
    assert abs(np.mean(y != 0) - 0.5) < 0.002
    assert abs(y.mean() - 1.0) < 0.005


# --- checkpoint container -------------------------------------------------------------


def test_checkpoint_round_trip_is_byte_exact(rng):
    state = {"a": rng.normal(size=(3, 4)), "zeta": np.array(0.25), "e": np.zeros((0, 2))}
    blob = encode(state)
    back = decode(blob)
    assert list(back) == list(state)
    for k in state:
        assert back[k].shape == state[k].shape and np.array_equal(back[k], state[k])
    assert encode(back) == blob


def test_checkpoint_corruption_detected(rng):
    blob = bytearray(encode({"a": rng.normal(size=5)}))
    with pytest.raises(CheckpointError):
        decode(bytes(blob[:-7]))
    blob[20] ^= 0xFF
    with pytest.raises(CheckpointError):
        decode(bytes(blob))
    with pytest.raises(CheckpointError):
        decode(b"NOTACKPT" + bytes(16))


def test_param_store_load_checks_names_and_shapes(rng):
    store = ParamStore(rng)
    store.matrix("w", 2, 3)
    with pytest.raises(ValueError, match="w"):
        store.load_state({"w": np.zeros((3, 2))})
    with pytest.raises(KeyError):
        store.load_state({})
    with pytest.raises(KeyError):
        store.load_state({"w": np.zeros((2, 3)), "extra": np.zeros(1)})
