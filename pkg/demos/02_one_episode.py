"""Walk through one greedy counting episode by hand.

Three proposals: two overlapping boxes on the same object and one separate
object.  Picking proposal 0 pushes its twin (1) below the stop logit through a
negative interaction, so the episode counts 2 instead of 3.

    python demos/02_one_episode.py
"""
import numpy as np

from irlc.counters.rollout import irlc_greedy_rollout, irlc_sample_rollout

kappa0 = np.array([2.0, 1.8, 1.5])
zeta = 0.0
rho = np.array([
    [0.0, -4.0, 0.0],
    [-4.0, 0.0, 0.0],
    [0.0, 0.0, 0.0],
])

ep = irlc_greedy_rollout(kappa0, zeta, rho)
for t, (a, k, p) in enumerate(zip(ep.actions, ep.kappa_trajectory, ep.step_distributions)):
    what = "stop" if a == ep.terminal else f"select {a}"
    print(f"step {t}: logits {np.round(k, 2)} | zeta {zeta}  p={np.round(p, 3)}  -> {what}")
print("greedy count:", ep.count, "selected:", ep.selected)

rng = np.random.default_rng(1)
counts = [irlc_sample_rollout(kappa0, zeta, rho, rng).count for _ in range(2000)]
print("sampled count histogram:", np.bincount(counts, minlength=4).tolist())
