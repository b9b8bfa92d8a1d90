"""IRLC: counting by sequential object selection, trained with self-critical policy gradient."""
from __future__ import annotations

import numpy as np

from ..batching import PAIR_DIM, pair_inputs
from ..core import tensor as T
from ..core.layers import MLP2, Affine
from .base import CountingModel, CountPrediction
from .rollout import episode_terms, irlc_greedy_rollout, rollout_batch, self_critical_reward

N_SAMPLES = 5
ENTROPY_WEIGHT = 0.005
INTERACTION_WEIGHT = 0.005


class IRLC(CountingModel):
    kind = "irlc"
    needs_pairs = True

    def __init__(self, *args, n_samples=N_SAMPLES, entropy_weight=ENTROPY_WEIGHT,
                 interaction_weight=INTERACTION_WEIGHT, **kwargs):
        self.n_samples = n_samples
        self.entropy_weight = entropy_weight
        self.interaction_weight = interaction_weight
        super().__init__(*args, **kwargs)

    def build_head(self):
        d, st = self.dims, self.store
        self.kappa = Affine(st, "irlc.kappa", d.n_score, 1)
        self.zeta = st.add("irlc.zeta", np.zeros(()))
        d_q = max(1, d.d_hid // 4)
        self.q_proj = Affine(st, "irlc.qproj", d.d_hid, d_q)
        self.rho_mlp = MLP2(st, "irlc.rho", d_q + PAIR_DIM, d.rho_hidden, 1)

    def irlc_init_logits(self, s):
        """``kappa0``: one logit per object from its score vector."""
        return self.kappa(s)[..., 0]

    def interactions(self, q, pairs):
        """``rho`` [B, N, N] from question encodings [B, d_hid] and pair inputs [B, N, N, 12]."""
        pairs = np.asarray(pairs, dtype=np.float64)
        B, N = pairs.shape[:2]
        qc = self.q_proj(q)
        d_q = qc.shape[-1]
        qb = T.broadcast_to(T.reshape(qc, (B, 1, 1, d_q)), (B, N, N, d_q))
        return self.rho_mlp(T.concat([qb, T.Tensor(pairs)], axis=-1))[..., 0]

    def irlc_interactions(self, q, scene):
        """Interaction matrix [N, N] for one question encoding and scene."""
        return self.interactions(T.reshape(q, (1, self.dims.d_hid)), pair_inputs(scene)[None])[0]

    def heads(self, batch, training=False, rng=None):
        q, s = self.encode(batch, training, rng)
        return self.irlc_init_logits(s), self.interactions(q, batch.pairs)

    def loss(self, batch, rng):
        kappa0, rho = self.heads(batch, training=True, rng=rng)
        B, N = batch.mask.shape
        K = self.n_samples
        zeta = float(self.zeta.data)
        _, greedy, _ = rollout_batch(kappa0.data, zeta, rho.data, batch.mask)
        acts, _, _ = rollout_batch(
            np.repeat(kappa0.data, K, axis=0), zeta, np.repeat(rho.data, K, axis=0),
            np.repeat(batch.mask, K, axis=0), rng=rng,
        )
        acts = acts.reshape(B, K, -1)
        terms = episode_terms(kappa0, self.zeta, rho, acts, batch.mask)
        reward = self_critical_reward(terms["counts"], greedy[:, None], batch.counts[:, None]).astype(np.float64)
        per_episode = (
            -reward * terms["log_prob"]
            + self.entropy_weight * terms["neg_entropy"]
            + self.interaction_weight * terms["interaction"]
        ) * (1.0 / terms["steps"])
        return T.mean(per_episode), {"pred": greedy, "reward": reward}

    def rollouts(self, batch):
        with T.no_grad():
            kappa0, rho = self.heads(batch)
        acts, counts, _ = rollout_batch(kappa0.data, float(self.zeta.data), rho.data, batch.mask)
        return acts, counts, kappa0.data, rho.data

    def predict(self, batch):
        acts, counts, _, _ = self.rollouts(batch)
        n = batch.n_objects
        out = []
        for b in range(len(batch)):
            order = [int(a) for a in acts[b] if 0 <= a < n[b]]
            w = np.zeros(n[b])
            w[order] = 1.0
            out.append(CountPrediction(int(counts[b]), w, order=order))
        return out

    def greedy_episode(self, batch, b=0):
        """Full greedy Episode record (logit trajectory, step distributions) for row ``b``."""
        with T.no_grad():
            kappa0, rho = self.heads(batch)
        n = int(batch.n_objects[b])
        return irlc_greedy_rollout(kappa0.data[b, :n], float(self.zeta.data), rho.data[b, :n, :n])
