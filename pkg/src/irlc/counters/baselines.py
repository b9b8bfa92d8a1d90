"""Non-visual baselines: the modal training count and a question-only regressor."""
from __future__ import annotations

from collections import Counter

import numpy as np

from ..core import tensor as T
from ..core.layers import Affine
from .base import CountingModel, CountPrediction, round_count
from .softcount import softcount_loss


def guess1_baseline(train_qas):
    """Most common ground-truth count in ``train_qas`` (smaller count on ties)."""
    counts = Counter(int(qa.count) for qa in train_qas)
    if not counts:
        raise ValueError("Guess1 needs a non-empty training split")
    top = max(counts.values())
    return min(c for c, k in counts.items() if k == top)


class Guess1:
    kind = "guess1"
    needs_pairs = False
    grounder = None

    def __init__(self, mode=None):
        self.mode = mode

    def fit(self, train_qas):
        self.mode = guess1_baseline(train_qas)
        return self

    def parameters(self):
        return []

    def predict(self, batch):
        n = batch.n_objects
        return [CountPrediction(int(self.mode), np.zeros(n[b])) for b in range(len(batch))]


class LSTMBaseline(CountingModel):
    """Count regressed from the question encoding alone."""

    kind = "lstm"
    uses_image = False

    def build_head(self):
        self.head = Affine(self.store, "lstm.head", self.dims.d_hid, 1)

    def raw(self, q):
        return self.head(q)[..., 0]

    def lstm_baseline_predict(self, q):
        return int(round_count(self.raw(q).data))

    def loss(self, batch, rng):
        q, _ = self.encode(batch, training=True, rng=rng)
        raw = self.raw(q)
        return T.mean(softcount_loss(raw, batch.counts)), {"pred": round_count(raw.data)}

    def predict(self, batch):
        with T.no_grad():
            q, _ = self.encode(batch)
            raw = self.raw(q).data
        n = batch.n_objects
        return [CountPrediction(int(c), np.zeros(n[b]), raw=float(raw[b])) for b, c in enumerate(round_count(raw))]
