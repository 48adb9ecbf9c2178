"""How the MCP and SCAD proximal maps behave as the step grows.

For small steps the prox subproblem is convex and the map is a continuous
thresholding rule. Past the convexity limit (step >= gamma for MCP, step >=
gamma - 1 for SCAD) the map jumps, and ties are broken toward the smaller
magnitude.
"""
import numpy as np

from siadqr import PenaltyParams, penalty_prox
from siadqr.penalties import penalty_prox_oracle, prox_objective

a = np.linspace(-1.0, 1.0, 9)
for kind, gamma in [("MCP", 2.1), ("SCAD", 3.1)]:
    p = PenaltyParams(kind, 0.3, gamma)
    for t in (0.5, 1.5, 4.0):
        x = penalty_prox(a, p, t)
        regime = "convex" if p.prox_is_convex(t) else "nonconvex"
        print(f"{kind:4} t={t:3.1f} ({regime:9}): {np.array2string(x + 0.0, precision=3)}")

# A brute-force search agrees with the closed forms.
p = PenaltyParams("SCAD", 0.3, 3.1)
rng = np.random.default_rng(1)
a = rng.uniform(-2, 2, 1000)
t = rng.uniform(0.01, 6, 1000)
gap = prox_objective(penalty_prox(a, p, t), a, p, t) - prox_objective(penalty_prox_oracle(a, p, t), a, p, t)
print(f"largest objective gap against the search oracle: {gap.max():.2e}")
