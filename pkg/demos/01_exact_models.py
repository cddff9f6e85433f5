"""Exact computation on a small tabular MDP.

Builds a three-state chain, solves for the optimal Q-function, evaluates a
few policies, and follows the state-action occupancy forward in time.
Nothing here is sampled.
"""
# %%
import numpy as np

from boundary_lab import Policy, RewardDistribution, TabularMDP, occupancy, optimal_q, policy_q, policy_value
from boundary_lab.function_class import greedy_policy

pt = RewardDistribution.point
P = np.zeros((3, 2, 3))
P[0, 0] = [0.2, 0.8, 0.0]  # action 0 drifts right slowly
P[0, 1] = [0.0, 0.0, 1.0]  # action 1 jumps to the end
P[1, :, 2] = 1.0
P[2, :, 2] = 1.0
rewards = [
    [pt(0.0), pt(0.1)],
    [RewardDistribution.bernoulli(0.8), pt(0.5)],
    [pt(0.0), pt(0.0)],
]
mdp = TabularMDP(P, rewards, gamma=0.9, d0=[1.0, 0.0, 0.0])
print(mdp)

# %% Optimal values and the greedy policy
q = optimal_q(mdp)
print("Q*:\n", np.round(q, 4) + 0.0)
best = greedy_policy(q)
print("greedy actions:", best.actions.tolist(), " v* =", round(policy_value(mdp, best), 6))

# %% Any stationary policy is evaluated by a linear solve
uniform = Policy.uniform(3, 2)
print("uniform policy value:", round(policy_value(mdp, uniform), 6))
print("Q^uniform:\n", np.round(policy_q(mdp, uniform), 4))

# %% Occupancy d_t(s, a) of the greedy policy for the first three steps
for t in (1, 2, 3):
    print(f"d_{t} =", np.round(occupancy(mdp, best, t), 4).tolist())
