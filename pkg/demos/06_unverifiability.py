"""Whether rewards are deterministic cannot be tested from a large context space.

A tester sees m draws from a uniform context space of size nX. Under one
hypothesis rewards are fixed per context; under the other they are fresh
coins. The only evidence is a repeated context with disagreeing rewards,
so accuracy is capped by the birthday bound, up to Monte Carlo noise
of about 0.01 at 2000 trials.
"""
# %%
from boundary_lab.scenarios import collision_probability, scenario_unverifiability

for nX, m in ((10**6, 100), (10**4, 100), (100, 20), (1, 20)):
    rep = scenario_unverifiability(nX, m, 2000, seed=0)
    print(f"nX={nX:>8d} m={m:>3d}  P(collision)={collision_probability(nX, m):.4f}  "
          f"accuracy={rep.details['accuracy']:.4f}  ceiling={rep.details['ceiling']:.4f}")
