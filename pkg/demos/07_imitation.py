"""Behavior cloning across a boundary mismatch.

The expert sees a cue the learner does not. Cloning its actions on the
learner's coarse observations averages over the cue and lands well below
what the best coarse policy could have achieved.
"""
# %%
from boundary_lab.scenarios import scenario_imitation

rep = scenario_imitation(seed=0)
for a in rep.assertions:
    print(f"{a.name:35s} {a.actual!s:>20s}  ({a.provenance})")
print("all checks pass:", rep.passed)
