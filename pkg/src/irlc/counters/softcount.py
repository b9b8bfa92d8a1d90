"""SoftCount: sum of per-object sigmoid count values, trained with a Huber loss."""
from __future__ import annotations

import numpy as np

from ..core import tensor as T
from ..core.layers import Affine, huber
from .base import CountingModel, CountPrediction, round_count


def softcount_loss(raw_count, gt_count):
    """Huber loss on ``|raw - gt|``; broadcasts over a batch."""
    return huber(T.absolute(T.as_tensor(raw_count) - np.asarray(gt_count, dtype=np.float64)))


class SoftCount(CountingModel):
    kind = "softcount"

    def build_head(self):
        self.head = Affine(self.store, "softcount.head", self.dims.n_score, 1)

    def object_values(self, s, mask=None):
        """Per-object count values in (0, 1) and their sum.  ``s``: [..., N, n]."""
        w = T.sigmoid(self.head(s)[..., 0])
        if mask is not None:
            w = T.where(mask, w, 0.0)
        return w, T.tsum(w, axis=-1)

    def softcount_predict(self, s):
        """Prediction for one score matrix [N, n]."""
        if s.shape[0] == 0:
            return CountPrediction(0, np.zeros(0), raw=0.0)
        w, raw = self.object_values(s)
        return CountPrediction(int(round_count(raw.data)), w.data.copy(), raw=float(raw.data))

    def loss(self, batch, rng):
        _, s = self.encode(batch, training=True, rng=rng)
        _, raw = self.object_values(s, batch.mask)
        loss = T.mean(softcount_loss(raw, batch.counts))
        return loss, {"pred": round_count(raw.data)}

    def predict(self, batch):
        with T.no_grad():
            _, s = self.encode(batch)
            w, raw = self.object_values(s, batch.mask)
        counts = round_count(raw.data)
        n = batch.n_objects
        return [
            CountPrediction(int(c), w.data[b, : n[b]].copy(), raw=float(raw.data[b]))
            for b, c in enumerate(counts)
        ]
