"""Sequential counting episodes: greedy/sampled rollouts and their losses.

An episode starts from per-object logits ``kappa0`` and a terminal logit
``zeta``.  Each step picks an unselected object or the terminal action
(index ``N``); picking object ``i`` adds row ``i`` of the interaction matrix
``rho`` to the logits.  Selected objects are masked out, and once
``min(N, MAX_COUNT)`` objects have been selected only the terminal action
remains.  The count is the number of objects selected.

Rollouts run in plain numpy over many episodes at once.  Losses are then
rebuilt as differentiable tensors from the recorded actions:
``kappa^t = kappa0 + (selected-before-t) @ rho``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import tensor as T
from ..core.layers import huber

MAX_COUNT = 20


def _masked_softmax(logits, avail):
    x = np.where(avail, logits, -np.inf)
    x = x - x.max(axis=-1, keepdims=True)
    z = np.exp(x)
    return z / z.sum(axis=-1, keepdims=True)


def rollout_batch(kappa0, zeta, rho, valid=None, rng=None, cap=MAX_COUNT, record=False):
    """Run ``E`` episodes in lockstep.

    ``kappa0``: [E, N]; ``zeta``: scalar; ``rho``: [E, N, N]; ``valid``: [E, N]
    marks real (non-padding) objects.  Greedy when ``rng`` is None (ties go
    to the lower index, objects before the terminal action), sampled
    otherwise.

    Returns ``(actions, counts, extras)``.  ``actions`` is [E, T] with -1 after
    the terminal step; ``extras`` holds per-step logits and distributions when
    ``record`` is set.
    """
    kappa = np.array(kappa0, dtype=np.float64, copy=True)
    E, N = kappa.shape
    rho = np.asarray(rho, dtype=np.float64)
    valid = np.ones((E, N), dtype=bool) if valid is None else np.asarray(valid, dtype=bool)
    limit = np.minimum(valid.sum(axis=1), cap)
    avail = valid.copy()
    counts = np.zeros(E, dtype=np.int64)
    done = np.zeros(E, dtype=bool)
    rows = np.arange(E)
    actions, kappas, dists = [], [], []
    zeta_col = np.full((E, 1), float(zeta))
    while not done.all():
        obj_ok = avail & (counts < limit)[:, None]
        ok = np.concatenate([obj_ok, np.ones((E, 1), dtype=bool)], axis=1)
        logits = np.concatenate([kappa, zeta_col], axis=1)
        if rng is None:
            a = np.argmax(np.where(ok, logits, -np.inf), axis=1)
        else:
            p = _masked_softmax(logits, ok)
            cum = np.cumsum(p, axis=1)
            u = rng.random(E) * cum[:, -1]
            a = np.minimum((cum <= u[:, None]).sum(axis=1), N)
        if record:
            kappas.append(np.where(done[:, None], np.nan, kappa))
            dists.append(np.where(done[:, None], np.nan, _masked_softmax(logits, ok)))
        a = np.where(done, -1, a)
        actions.append(a)
        pick = (~done) & (a < N)
        if pick.any():
            r, i = rows[pick], a[pick]
            kappa[r] += rho[r, i]
            avail[r, i] = False
            counts[r] += 1
        done |= a == N
    extras = {}
    if record:
        extras = {"kappas": np.stack(kappas, axis=1), "dists": np.stack(dists, axis=1)}
    return np.stack(actions, axis=1), counts, extras


def episode_terms(kappa0, zeta, rho, actions, valid, cap=MAX_COUNT):
    """Differentiable per-episode quantities for recorded actions.

    ``kappa0``: Tensor [B, N]; ``zeta``: Tensor []; ``rho``: Tensor [B, N, N];
    ``actions``: int [B, K, T] (K episodes per row, -1 padding); ``valid``: [B, N].

    Returns a dict of [B, K] entries: ``log_prob`` (sum of log p^t(a^t)),
    ``neg_entropy`` (the entropy penalty, minus the summed step entropies),
    ``interaction`` (summed mean-Huber magnitude of the selected rows of rho),
    and numpy ``steps`` / ``counts``.
    """
    actions = np.asarray(actions)
    valid = np.asarray(valid, dtype=bool)
    B, K, Tn = actions.shape
    N = valid.shape[1]
    step_valid = actions >= 0
    a = np.where(step_valid, actions, N)
    chose = (a[..., None] == np.arange(N)) & step_valid[..., None]
    before = np.cumsum(chose, axis=2) - chose
    limit = np.minimum(valid.sum(axis=1), cap)
    n_before = before.sum(axis=-1)
    obj_ok = valid[:, None, None, :] & (before == 0) & (n_before < limit[:, None, None])[..., None]
    avail = np.concatenate([obj_ok, np.ones((B, K, Tn, 1), dtype=bool)], axis=-1)

    kappa_t = T.reshape(kappa0, (B, 1, 1, N)) + T.matmul(before.astype(np.float64), T.reshape(rho, (B, 1, N, N)))
    z = T.broadcast_to(T.reshape(zeta, (1, 1, 1, 1)), (B, K, Tn, 1))
    logp = T.log_softmax(T.concat([kappa_t, z], axis=-1), axis=-1, mask=avail)
    chosen = T.take_along_axis(logp, a[..., None], axis=-1)[..., 0]
    log_prob = T.tsum(T.where(step_valid, chosen, 0.0), axis=-1)

    p = T.where(avail, T.exp(logp), 0.0)
    step_entropy = -T.tsum(p * logp, axis=-1)
    neg_entropy = -T.tsum(T.where(step_valid, step_entropy, 0.0), axis=-1)

    mag = huber(T.absolute(T.where(valid[:, None, :], rho, 0.0)))
    n_obj = np.maximum(valid.sum(axis=1), 1).astype(np.float64)
    row_pen = T.tsum(mag, axis=-1) * (1.0 / n_obj)[:, None]
    selected = chose.sum(axis=2).astype(np.float64)
    interaction = T.tsum(T.reshape(row_pen, (B, 1, N)) * selected, axis=-1)
    return {
        "log_prob": log_prob,
        "neg_entropy": neg_entropy,
        "interaction": interaction,
        "steps": step_valid.sum(axis=-1),
        "counts": selected.sum(axis=-1).astype(np.int64),
    }


def self_critical_reward(sample_counts, greedy_counts, gt):
    """``R = E_greedy - E_sample`` with ``E = |count - gt|``; broadcasts over samples."""
    gt = np.asarray(gt)
    return np.abs(np.asarray(greedy_counts) - gt) - np.abs(np.asarray(sample_counts) - gt)


# ---------------------------------------------------------------------------
# single-episode interface


@dataclass
class Episode:
    """One rollout.  ``actions`` ends with the terminal index ``n_objects``."""

    actions: list
    n_objects: int
    zeta: float
    kappa_trajectory: list = field(default_factory=list)
    step_distributions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    source: tuple | None = field(default=None, repr=False)

    @property
    def terminal(self):
        return self.n_objects

    @property
    def selected(self):
        return [a for a in self.actions if a != self.n_objects]

    @property
    def count(self):
        return len(self.actions) - 1


def _as_inputs(kappa0, zeta, rho):
    k = T.as_tensor(kappa0)
    z = T.as_tensor(zeta)
    n = k.shape[-1]
    r = T.as_tensor(rho) if np.size(T.as_tensor(rho).data) else T.Tensor(np.zeros((n, n)))
    return k, z, r


def _episode(kappa0, zeta, rho, rng):
    k, z, r = _as_inputs(kappa0, zeta, rho)
    n = k.shape[-1]
    acts, _, ex = rollout_batch(
        k.data.reshape(1, n), float(z.data), r.data.reshape(1, n, n), rng=rng, record=True
    )
    acts = [int(a) for a in acts[0] if a >= 0]
    dists = [d for d in ex["dists"][0][: len(acts)]]
    return Episode(
        actions=acts,
        n_objects=n,
        zeta=float(z.data),
        kappa_trajectory=[kk for kk in ex["kappas"][0][: len(acts)]],
        step_distributions=dists,
        log_probs=[float(np.log(d[a])) for d, a in zip(dists, acts)],
        source=(k, z, r),
    )


def irlc_greedy_rollout(kappa0, zeta, rho):
    """Deterministic episode: always take the highest available logit."""
    return _episode(kappa0, zeta, rho, None)


def irlc_sample_rollout(kappa0, zeta, rho, rng):
    """Episode with actions drawn from softmax([kappa^t, zeta]) over available actions."""
    return _episode(kappa0, zeta, rho, rng)


def _terms(ep: Episode):
    k, z, r = ep.source
    n = ep.n_objects
    acts = np.array(ep.actions, dtype=np.int64).reshape(1, 1, -1)
    return episode_terms(T.reshape(k, (1, n)), z, T.reshape(r, (1, n, n)), acts, np.ones((1, n), dtype=bool))


def irlc_selfcritical_loss(sampled: Episode, greedy: Episode, gt_count):
    """``-R * sum_t log p^t(a^t)`` with the reward held constant."""
    R = float(self_critical_reward(sampled.count, greedy.count, gt_count))
    return -R * T.reshape(_terms(sampled)["log_prob"], ())


def irlc_entropy_penalty(episode: Episode):
    return T.reshape(_terms(episode)["neg_entropy"], ())


def irlc_interaction_penalty(episode: Episode, rho=None):
    if rho is not None:
        k, z, _ = episode.source
        episode = Episode(episode.actions, episode.n_objects, episode.zeta, source=(k, z, T.as_tensor(rho)))
    return T.reshape(_terms(episode)["interaction"], ())
