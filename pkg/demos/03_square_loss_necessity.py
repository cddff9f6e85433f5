"""Matching the average reward is not enough for a valid reward function.

Two contexts both pay 0.5. The table f1 = (1, 0) matches the mean reward
under every admissible distribution, yet least squares prefers the flat
f2 = (0.6, 0.6). The squared-loss condition is what rules f1 out.
"""
# %%
from boundary_lab.scenarios import scenario_sq_loss_necessity

for kwargs in ({}, {"with_f3": True}, {"d0": (0.9, 0.1)}):
    report = scenario_sq_loss_necessity(**kwargs)
    print(f"--- variant {kwargs or 'default'}: pass={report.passed}")
    for a in report.assertions:
        print(f"  {a.name:45s} expected={a.expected!s:8s} actual={a.actual}")
