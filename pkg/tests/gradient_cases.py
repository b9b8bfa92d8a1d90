"""Finite-difference cases: every differentiable operation and every full model.

Each builder takes an rng and returns ``(f, params)`` where ``f()`` is a
scalar tensor.  Objectives that draw random numbers reseed on every call so
the perturbed evaluations see the same dropout masks and sampled actions.
"""
import numpy as np

from irlc.batching import make_batch
from irlc.core import tensor as T
from irlc.core.layers import (
    ParamStore,
    LSTM,
    affine,
    cross_entropy,
    dropout,
    gtu_layer,
    huber,
    lstm_step,
    softmax_cross_entropy,
)
from irlc.core.tensor import Parameter
from irlc.counters import IRLC, LSTMBaseline, SoftCount, UpDown
from irlc.counters.rollout import episode_terms, rollout_batch
from irlc.grounding import assigned_captions


def _p(rng, *shape, name="x", low=-1.0, high=1.0):
    return Parameter(rng.uniform(low, high, size=shape), name=name)


def _weighted(out):
    w = np.random.default_rng(11).normal(size=out.shape)
    return T.tsum(out * w)


def _unary(op, low=-1.0, high=1.0):
    def build(rng):
        x = _p(rng, 4, 3, low=low, high=high)
        return (lambda: _weighted(op(x))), [x]

    return build


def _binary(op):
    def build(rng):
        a, b = _p(rng, 3, 4, name="a"), _p(rng, 4, name="b", low=0.5, high=1.5)
        return (lambda: _weighted(op(a, b))), [a, b]

    return build


def _shape(fn, shape=(2, 3, 4)):
    def build(rng):
        x = _p(rng, *shape)
        return (lambda: _weighted(fn(x))), [x]

    return build


def _matmul(rng):
    a, b = _p(rng, 2, 3, 4, name="a"), _p(rng, 4, 5, name="b")
    return (lambda: _weighted(T.matmul(a, b))), [a, b]


def _concat(rng):
    a, b = _p(rng, 2, 3, name="a"), _p(rng, 2, 2, name="b")
    return (lambda: _weighted(T.concat([a, b], axis=1))), [a, b]


def _stack(rng):
    a, b = _p(rng, 2, 3, name="a"), _p(rng, 2, 3, name="b")
    return (lambda: _weighted(T.stack([a, b], axis=0))), [a, b]


def _where(rng):
    a, b = _p(rng, 3, 3, name="a"), _p(rng, 3, 3, name="b")
    cond = np.eye(3, dtype=bool)
    return (lambda: _weighted(T.where(cond, a, b))), [a, b]


def _masked(fn):
    def build(rng):
        x = _p(rng, 3, 5, low=-3, high=3)
        mask = rng.random((3, 5)) > 0.3
        mask[:, 0] = True
        return (lambda: _weighted(fn(x, axis=-1, mask=mask))), [x]

    return build


def _affine(rng):
    x, W, b = _p(rng, 2, 5, name="x"), _p(rng, 3, 5, name="W"), _p(rng, 3, name="b")
    return (lambda: _weighted(affine(x, W, b))), [x, W, b]


def _gtu(rng):
    x = _p(rng, 2, 4, name="x")
    ps = [_p(rng, 3, 4, name="W1"), _p(rng, 3, name="b1"), _p(rng, 3, 4, name="W2"), _p(rng, 3, name="b2")]
    return (lambda: _weighted(gtu_layer(x, ps))), [x, *ps]


def _lstm_step(rng):
    x, h, c = _p(rng, 3, name="x"), _p(rng, 4, name="h"), _p(rng, 4, name="c")
    ps = [_p(rng, 16, 3, name="Wx"), _p(rng, 16, 4, name="Wh"), _p(rng, 16, name="b")]
    return (lambda: _weighted(T.concat(list(lstm_step(x, h, c, ps))))), [x, h, c, *ps]


def _lstm_run(rng):
    store = ParamStore(rng)
    lstm = LSTM(store, "l", 3, 4)
    xs = [_p(rng, 2, 3, name=f"x{t}") for t in range(3)]
    return (lambda: _weighted(lstm.run(xs, np.array([3, 2])))), list(store) + xs


def _huber(rng):
    e = _p(rng, 6, low=0.05, high=2.5)
    return (lambda: _weighted(huber(e))), [e]


def _ce(rng):
    z = _p(rng, 21)
    return (lambda: cross_entropy(T.softmax(z), 4)), [z]


def _softmax_ce(rng):
    z = _p(rng, 3, 21)
    return (lambda: T.tsum(softmax_cross_entropy(z, np.array([0, 5, 20])))), [z]


def _dropout(rng):
    x = _p(rng, 4, 5)
    return (lambda: _weighted(dropout(x, 0.3, True, np.random.default_rng(3)))), [x]


def _episode_terms(rng):
    N, K = 4, 6
    k0, rho = _p(rng, 1, N, name="kappa0"), _p(rng, 1, N, N, name="rho", low=-2, high=2)
    z = Parameter(np.array(0.1), name="zeta")
    acts, _, _ = rollout_batch(np.repeat(k0.data, K, 0), 0.0, np.repeat(rho.data, K, 0), rng=np.random.default_rng(2))
    acts = acts.reshape(1, K, -1)
    valid = np.ones((1, N), dtype=bool)

    def f():
        t = episode_terms(k0, T.reshape(z, ()), rho, acts, valid)
        return T.tsum(t["log_prob"] * 0.7 + t["neg_entropy"] * 0.3 + t["interaction"] * 0.2)

    return f, [k0, z, rho]


OP_CASES = {
    "add": _binary(T.add),
    "sub": _binary(T.sub),
    "mul": _binary(T.mul),
    "div": _binary(T.div),
    "power": _unary(lambda x: T.power(x, 3)),
    "exp": _unary(T.exp),
    "log": _unary(T.log, 0.2, 2.0),
    "abs": _unary(T.absolute, 0.1, 2.0),
    "tanh": _unary(T.tanh, -2, 2),
    "sigmoid": _unary(T.sigmoid, -4, 4),
    "relu": _unary(T.relu, 0.1, 2.0),
    "sum": _shape(lambda x: T.tsum(x, axis=1)),
    "mean": _shape(lambda x: T.mean(x, axis=(0, 2))),
    "reshape": _shape(lambda x: T.reshape(x, (4, 6))),
    "transpose": _shape(lambda x: T.transpose(x, (1, 2, 0))),
    "swapaxes": _shape(lambda x: T.swapaxes(x, 0, 1)),
    "broadcast_to": _shape(lambda x: T.broadcast_to(x, (3, 2, 4)), (2, 1)),
    "getitem": _shape(lambda x: x[np.array([0, 1, 1]), 1:]),
    "take_along_axis": _shape(lambda x: T.take_along_axis(x, np.zeros((2, 3, 2), dtype=int) + [1, 3], axis=2)),
    "concat": _concat,
    "stack": _stack,
    "where": _where,
    "matmul": _matmul,
    "softmax": _masked(T.softmax),
    "log_softmax": _masked(T.log_softmax),
    "affine": _affine,
    "gtu": _gtu,
    "lstm_step": _lstm_step,
    "lstm_run": _lstm_run,
    "huber": _huber,
    "cross_entropy": _ce,
    "softmax_cross_entropy": _softmax_ce,
    "dropout": _dropout,
    "episode_terms": _episode_terms,
}


def model_objective(model, batch, seed=0, grounding_scenes=None):
    """Training loss of ``model`` on ``batch`` with randomness pinned by ``seed``."""

    def f():
        loss, _ = model.loss(batch, np.random.default_rng(seed))
        if grounding_scenes is not None and model.grounder is not None:
            caps = [c for s in grounding_scenes for c in assigned_captions(s)]
            g = model.grounder.loss(caps, {s.image_id: s for s in grounding_scenes})
            if g is not None:
                loss = loss + 0.1 * g
        return loss

    return f


MODEL_CLASSES = {"softcount": SoftCount, "updown": UpDown, "irlc": IRLC, "lstm": LSTMBaseline}


def model_case(kind, vocab, dims, scenes, qas, seed=0):
    cls = MODEL_CLASSES[kind]
    model = cls(vocab, dims, seed=seed, grounding=cls.uses_image)
    by_id = {s.image_id: s for s in scenes}
    batch = make_batch(qas, by_id, vocab, dims.d_v, model.needs_pairs)
    return model_objective(model, batch, seed, scenes), model.parameters()
