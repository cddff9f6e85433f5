"""Three performance bounds on one coin-flip bandit, seen two ways.

A single context pays Bernoulli(1/2). The same data can be described with
one context (stochastic reward) or with two equally likely contexts that
pay 1 and 0 deterministically. A class holding only the constant 1/2 is
realizable in the first view and misspecified in the second; the classical
guarantee collapses while the boundary-invariant one does not move.
"""
# %%
from boundary_lab import admissible_cb, check_realizability, find_valid_reward_function, reward_derandomize_split
from boundary_lab.bounds import bound_cb_classical, bound_cb_invariant, bound_cb_robust
from boundary_lab.instances import fig2b

coin = fig2b()
two = reward_derandomize_split(coin.mdp, coin.F, (0, 0))
mu_two = two.map.lift_sa(coin.mu)
print("one context: d0 =", coin.mdp.d0.tolist(), " two contexts: d0 =", two.fine.d0.tolist())

# %% Realizability flips across the two descriptions
r1 = check_realizability(coin.mdp, coin.F, coin.mu)
r2 = check_realizability(two.fine, two.lifted_class, mu_two)
print(f"realizable with one context: {r1.holds}; with two: {r2.holds} (eps_approx = {r2.eps_approx})")

# %% Bounds with exact regression (eps = 0) and C = 1
print("classical bound, one context:", bound_cb_classical(1.0, 0.0, 0.5))
print("robust bound, two contexts:  ", bound_cb_robust(1.0, 0.0, r2.eps_approx, 0.5))

# %% The constant is a valid reward function in both views
valid = find_valid_reward_function(two.fine, two.lifted_class, mu_two, admissible_cb(two.fine, two.lifted_class))
print("valid reward function index:", valid.f_star_index)
print("invariant bound, two contexts:", bound_cb_invariant(1.0, 0.0, 0.5))
