"""Refining the agent-environment boundary without the learner noticing.

Each refinement produces a finer MDP, a map back to the original states,
and a lifted function class. A coupled run draws one fine dataset, projects
it to the coarse states, and checks that the learner makes identical
choices on both.
"""
# %%
import numpy as np

from boundary_lab import Policy, cosmetic_split, determinize, invariance_sweep, policy_value, reward_derandomize_split
from boundary_lab.instances import random_cb, random_class, random_mdp, random_mu

rng = np.random.default_rng(0)

# %% Cosmetic split of a discounted MDP, learned with FQI
mdp = random_mdp(rng, 3, 2, 0.8)
F = random_class(rng, 4, 3, 2, mdp.vmax)
mu = random_mu(rng, 3, 2)
split = cosmetic_split(mdp, F, [2, 1, 3])
print("cosmetic:", mdp.nS, "->", split.fine.nS, "states")
print("  agreement:", invariance_sweep("run_fqi", split, mu, 60, range(20), k=5).all_agree)

# %% Moving reward noise into the context of a bandit
cb = random_cb(rng, 2, 2)
G = random_class(rng, 3, 2, 2)
der = reward_derandomize_split(cb, G, (0, 1))
print("derandomize:", cb.nS, "->", der.fine.nS, "contexts; emission", der.map.emission.round(3).tolist())
print("  agreement:", invariance_sweep("fit_cb", der, random_mu(rng, 2, 2), 60, range(20)).all_agree)

# %% Pre-drawing all randomness of the first step into the start state
det = determinize(mdp, F, horizon=1)
uniform = Policy.uniform(mdp.nS, mdp.nA)
print("determinize:", mdp.nS, "->", det.fine.nS, "states")
print("  uniform policy value, coarse vs fine:",
      round(policy_value(mdp, uniform), 10), round(policy_value(det.fine, det.map.lift_policy(uniform)), 10))
