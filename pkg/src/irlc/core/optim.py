"""Adam with bias correction and the two learning-rate schedules used in training."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state: AdamState):
    """Apply one Adam update to every trainable parameter, then zero grads."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p in params:
        if not p.trainable:
            continue
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(p.data)
            state.v[p.name] = np.zeros_like(p.data)
        v = state.v[p.name]
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.zero_grad()


class ExponentialDecay:
    """Multiply the learning rate by ``factor`` every iteration."""

    def __init__(self, state: AdamState, factor: float):
        self.state = state
        self.factor = factor

    def after_step(self):
        self.state.lr *= self.factor

    def after_epoch(self, train_accuracy):
        pass


class PlateauDecay:
    """Multiply the learning rate by ``factor`` when training accuracy stalls.

    A plateau is ``patience`` consecutive evaluation windows without a new
    best training accuracy.
    """

    def __init__(self, state: AdamState, factor: float = 0.8, patience: int = 1):
        self.state = state
        self.factor = factor
        self.patience = patience
        self.best = -np.inf
        self.stale = 0

    def after_step(self):
        pass

    def after_epoch(self, train_accuracy):
        if train_accuracy > self.best:
            self.best = train_accuracy
            self.stale = 0
            return
        self.stale += 1
        if self.stale >= self.patience:
            self.state.lr *= self.factor
            self.stale = 0
