"""Inspect the convergence monitors on a long run.

The penalty parameter grows like sqrt(k), so successive differences of the
iterates should shrink at a polynomial rate. We fit log-log slopes of three
monitored quantities once the penalty has passed its threshold and check
that the exact augmented Lagrangian settles down.
"""
import numpy as np

from siadqr import PenaltyParams, ProblemInstance, ScenarioConfig, SolverConfig, gen_trial, solve
from siadqr.diagnostics import rate_fit, sigma_threshold

trial = gen_trial(ScenarioConfig(seed=2))
prob = ProblemInstance(trial.X, trial.y, trial.tau)
penalty = PenaltyParams("MCP", 0.055, 2.1)

res = solve(prob, SolverConfig(penalty, max_iters=10_000, trace_stride=10, check_stopping=False))
print(f"sigma threshold {sigma_threshold(prob, penalty):.2f} reached at k={res.threshold_iter}")
print(f"smallest dual-difference slack {res.min_lemma7_slack:.3e} (never negative)")

lo = max(1000, res.threshold_iter or 0)
for q in ("dw_sq", "sigma_primal_sq", "subgrad_bound"):
    fit = rate_fit(res.trace, q, lo, 10_000)
    print(f"{q:>16}: slope {fit.slope:6.2f}  (r^2 {fit.r2:.2f}, {fit.n_points} points)")

lag = np.array([r.exact_lagrangian for r in res.trace if r.k >= lo])
print(f"largest late Lagrangian increase {max(np.diff(lag).max(), 0.0):.2e}, "
      f"total late decrease {lag[0] - lag[-1]:.3e}")
