"""UpDown: question-guided attention over proposals, then a 21-way count classifier."""
from __future__ import annotations

import numpy as np

from ..core import tensor as T
from ..core.layers import GTU, Affine, softmax_cross_entropy
from .base import N_CLASSES, CountingModel, CountPrediction


class UpDown(CountingModel):
    kind = "updown"

    def build_head(self):
        d, st = self.dims, self.store
        self.att = Affine(st, "updown.att", d.n_score, 1)
        self.f_v = GTU(st, "updown.fv", d.d_v, d.n_score)
        self.f_q = GTU(st, "updown.fq", d.d_hid, d.n_score)
        self.f_c = GTU(st, "updown.fc", d.n_score, d.n_score)
        self.out = Affine(st, "updown.out", d.n_score, N_CLASSES)

    def updown_attend(self, s, features, mask=None):
        """Attention ``alpha`` [..., N] and attended feature ``v_hat`` [..., d_v].

        A row without proposals gets all-zero attention and a zero ``v_hat``.
        """
        alpha = T.softmax(self.att(s)[..., 0], axis=-1, mask=mask)
        feats = np.asarray(features, dtype=np.float64)
        v_hat = T.matmul(T.reshape(alpha, alpha.shape[:-1] + (1, alpha.shape[-1])), feats)
        return alpha, T.reshape(v_hat, alpha.shape[:-1] + (feats.shape[-1],))

    def logits(self, v_hat, q):
        return self.out(self.f_c(self.f_v(v_hat) * self.f_q(q)))

    def updown_classify(self, v_hat, q):
        """Distribution over counts 0..20."""
        return T.softmax(self.logits(v_hat, q), axis=-1)

    def loss(self, batch, rng):
        q, s = self.encode(batch, training=True, rng=rng)
        _, v_hat = self.updown_attend(s, batch.features, batch.mask)
        logits = self.logits(v_hat, q)
        loss = T.mean(softmax_cross_entropy(logits, batch.counts))
        pred = np.argmax(logits.data, axis=-1)
        pred[batch.n_objects == 0] = 0
        return loss, {"pred": pred}

    def predict(self, batch):
        with T.no_grad():
            q, s = self.encode(batch)
            alpha, v_hat = self.updown_attend(s, batch.features, batch.mask)
            p = self.updown_classify(v_hat, q).data
        n = batch.n_objects
        out = []
        for b in range(len(batch)):
            # argmax takes the first maximum: ties resolve to the smaller count
            count = int(np.argmax(p[b])) if n[b] else 0
            out.append(CountPrediction(count, alpha.data[b, : n[b]].copy(), probs=p[b].copy()))
        return out
