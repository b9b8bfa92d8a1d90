"""Parameter store, layer primitives and losses built on :mod:`irlc.core.tensor`."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Parameter, Tensor

CE_CLAMP = 50.0  # -log p is capped here when p underflows


class ParamStore:
    """Ordered name -> Parameter map.  Layers register their weights here."""

    def __init__(self, rng=None):
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self._params = {}

    def add(self, name, value, trainable=True):
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        p = Parameter(value, name=name, trainable=trainable)
        self._params[name] = p
        return p

    def matrix(self, name, rows, cols):
        a = np.sqrt(6.0 / (rows + cols))
        return self.add(name, self.rng.uniform(-a, a, size=(rows, cols)))

    def zeros(self, name, *shape):
        return self.add(name, np.zeros(shape))

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params)

    def state(self):
        return {k: p.data.copy() for k, p in self._params.items()}

    def load_state(self, state, strict=True):
        for k, p in self._params.items():
            if k not in state:
                if strict:
                    raise KeyError(f"checkpoint has no parameter {k!r}")
                continue
            v = np.asarray(state[k], dtype=np.float64)
            if v.shape != p.data.shape:
                raise ValueError(f"shape mismatch for {k!r}: checkpoint {v.shape}, model {p.data.shape}")
            p.data[...] = v
        if strict:
            extra = set(state) - set(self._params)
            if extra:
                raise KeyError(f"checkpoint has unknown parameters {sorted(extra)}")

    def zero_grad(self):
        for p in self._params.values():
            p.zero_grad()


# ---------------------------------------------------------------------------
# functional primitives


def affine(x, W, b):
    """``W x + b`` applied along the last axis of ``x``."""
    x = T.as_tensor(x)
    if x.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise ValueError(f"affine shape mismatch: x {x.shape}, W {W.shape}, b {b.shape}")
    return T.matmul(x, T.transpose(W)) + b


tanh = T.tanh
sigmoid = T.sigmoid
relu = T.relu
softmax = T.softmax
log_softmax = T.log_softmax


def gtu_layer(x, params):
    """Gated tanh unit: ``tanh(W1 x + b1) * sigmoid(W2 x + b2)``."""
    W1, b1, W2, b2 = params
    return T.tanh(affine(x, W1, b1)) * T.sigmoid(affine(x, W2, b2))


def lstm_step(x, h_prev, c_prev, params):
    """One standard LSTM step.  ``params`` = (W_x [4h, d], W_h [4h, h], b [4h]).

    Gate order in the stacked weights is input, forget, output, candidate.
    """
    W_x, W_h, b = params
    hid = W_h.shape[1]
    if T.as_tensor(h_prev).shape[-1] != hid or T.as_tensor(c_prev).shape[-1] != hid:
        raise ValueError("lstm_step: hidden state size does not match weights")
    z = affine(x, W_x, b) + T.matmul(h_prev, T.transpose(W_h))
    i = T.sigmoid(z[..., 0:hid])
    f = T.sigmoid(z[..., hid : 2 * hid])
    o = T.sigmoid(z[..., 2 * hid : 3 * hid])
    g = T.tanh(z[..., 3 * hid :])
    c = f * c_prev + i * g
    h = o * T.tanh(c)
    return h, c


def huber(e):
    """0.5 e^2 for e <= 1, e - 0.5 otherwise.  ``e`` must be non-negative."""
    e = T.as_tensor(e)
    if np.any(e.data < 0):
        raise ValueError("huber expects a non-negative error")
    return T.where(e.data <= 1.0, 0.5 * e * e, e - 0.5)


def cross_entropy(p, target):
    """``-log p[target]`` for a probability vector, clamped at CE_CLAMP."""
    p = T.as_tensor(p)
    n = p.shape[-1]
    if not 0 <= target < n:
        raise IndexError(f"target {target} out of range for {n} classes")
    pt = p[..., target]
    floor = np.exp(-CE_CLAMP)
    ok = pt.data > floor
    safe = T.where(ok, pt, floor)
    return -T.log(safe)


def softmax_cross_entropy(logits, target, mask=None):
    """Cross entropy from logits; ``target`` may be an index array over leading axes."""
    logp = T.log_softmax(logits, axis=-1, mask=mask)
    target = np.asarray(target)
    if np.any(target < 0) or np.any(target >= logits.shape[-1]):
        raise IndexError("cross entropy target out of range")
    picked = T.take_along_axis(logp, target[..., None], axis=-1)[..., 0]
    return -picked


def dropout(x, rate, training, rng):
    """Inverted dropout; identity in evaluation mode."""
    if not 0 <= rate < 1:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0:
        return x
    x = T.as_tensor(x)
    keep = rng.random(x.shape) >= rate
    return x * (keep / (1.0 - rate))


# ---------------------------------------------------------------------------
# stateful layers


class Affine:
    def __init__(self, store, name, n_in, n_out):
        self.W = store.matrix(f"{name}.W", n_out, n_in)
        self.b = store.zeros(f"{name}.b", n_out)

    def __call__(self, x):
        return affine(x, self.W, self.b)


class GTU:
    def __init__(self, store, name, n_in, n_out):
        self.tanh_part = Affine(store, f"{name}.tanh", n_in, n_out)
        self.gate_part = Affine(store, f"{name}.gate", n_in, n_out)

    @property
    def params(self):
        return (self.tanh_part.W, self.tanh_part.b, self.gate_part.W, self.gate_part.b)

    def __call__(self, x):
        return gtu_layer(x, self.params)


class LSTM:
    def __init__(self, store, name, n_in, n_hid):
        self.n_hid = n_hid
        self.W_x = store.matrix(f"{name}.W_x", 4 * n_hid, n_in)
        self.W_h = store.matrix(f"{name}.W_h", 4 * n_hid, n_hid)
        self.b = store.zeros(f"{name}.b", 4 * n_hid)

    @property
    def params(self):
        return (self.W_x, self.W_h, self.b)

    def step(self, x, h, c):
        return lstm_step(x, h, c, self.params)

    def run(self, xs, lengths):
        """Encode a padded batch.  ``xs``: list over time of [B, d] tensors.

        Sequences shorter than the batch maximum keep their state once they
        end, so the result is each sequence's own final hidden state.
        """
        B = len(lengths)
        h = T.Tensor(np.zeros((B, self.n_hid)))
        c = T.Tensor(np.zeros((B, self.n_hid)))
        lengths = np.asarray(lengths)
        for t, x in enumerate(xs):
            h_new, c_new = self.step(x, h, c)
            live = (t < lengths)[:, None]
            if live.all():
                h, c = h_new, c_new
            else:
                h = T.where(live, h_new, h)
                c = T.where(live, c_new, c)
        return h


class MLP2:
    """Two affine layers with a ReLU between them."""

    def __init__(self, store, name, n_in, n_hidden, n_out):
        self.l1 = Affine(store, f"{name}.l1", n_in, n_hidden)
        self.l2 = Affine(store, f"{name}.l2", n_hidden, n_out)

    def __call__(self, x):
        return self.l2(T.relu(self.l1(x)))


class Embedding:
    def __init__(self, store, name, n_tokens, dim, init=None):
        if init is None:
            init = store.rng.normal(0.0, 0.1, size=(n_tokens, dim))
        self.table = store.add(f"{name}.table", init)

    def __call__(self, idx):
        return self.table[np.asarray(idx)]


def all_finite(x: Tensor) -> bool:
    return bool(np.all(np.isfinite(x.data)))
