"""Fitted Q-iteration on a class closed under the Bellman operator.

Draws a two-layer episodic MDP whose class contains the backup orbits of a
few seed tables, checks the completeness-type assumptions, runs FQI in
population mode, and compares the achieved value with its guarantee.
"""
# %%
import numpy as np

from boundary_lab import (
    admissible_mdp,
    build_b_operator,
    check_contraction,
    exploratory_bi,
    fixed_point_of_b,
    inherent_bellman_error,
    policy_value,
    run_fqi,
)
from boundary_lab.bounds import fqi_report
from boundary_lab.function_class import greedy_policy
from boundary_lab.instances import layered_closed_instance

prob = layered_closed_instance(np.random.default_rng(4))
mdp, F, mu = prob.mdp, prob.F, prob.mu
print(mdp, "class:", F.names)

# %% Assumption checks over the exact admissible set
A = admissible_mdp(mdp, F, horizon=4)
print("admissible distributions:", len(A), A.exactness)
print("inherent Bellman error:", inherent_bellman_error(mdp, F).status)
B = build_b_operator(mdp, F, mu, A)
print("B maps class indices to:", B.mapping)
print("contraction:", check_contraction(mdp, B, F, A).status)
fp = fixed_point_of_b(B, F, A, 1e-9 * mdp.vmax)
print("fixed point:", F.names[fp.f_star_index], "reached along", fp.path)

# %% FQI and the bound
k = 60
trace = run_fqi(F, k, mdp=mdp, mu=mu)
C = max(exploratory_bi(F, mu, A).constant, 1.0)
anchor = policy_value(mdp, greedy_policy(F[fp.f_star_index]))
report = fqi_report(C, trace.max_eps, k, mdp.gamma, mdp.vmax, anchor, policy_value(mdp, trace.policy))
print("iterates:", [F.names[i] for i in trace.iterates[:6]], "...")
print(f"bound {report.bound:.6f} achieved {report.achieved:.6f} satisfied={report.satisfied}")
