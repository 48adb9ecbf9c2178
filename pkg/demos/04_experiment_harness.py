"""Run a small multi-seed comparison through the experiment harness.

The same layout as the bundled TOML configs is given here as a dict. The
harness writes one trace per solver and trial plus summary.csv and
summary.json, and repeated runs produce byte-identical files.
"""
import json
import sys
import tempfile
from pathlib import Path

from siadqr.experiment import run_experiment, spec_from_mapping

doc = {
    "experiment": {"name": "demo", "trials": 3, "seed": 0, "iters": 2000, "trace_stride": 50},
    "scenario": {"kind": "S1_2_4", "tau": 0.7},
    "penalty": {"kind": "MCP", "lambda": 0.055, "gamma": 2.1},
    "solver": {
        "SIAD": {"method": "SIAD"},
        "SUB": {"method": "Subgradient", "step0": 0.5},
        "ADMM": {"method": "VanillaADMM", "sigma": 1.0},
    },
}

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp())
summary = run_experiment(spec_from_mapping(doc), out)
for solver, agg in summary["cells"]["main"].items():
    print(f"{solver:>5}: mean MSE {agg['final_mean_mse']:.4f}, "
          f"accuracy {agg['final_mean_accuracy']:.3f}, per trial "
          f"{[round(v, 4) for v in agg['per_trial_final_mse']]}")
print(f"files under {out}:")
for f in sorted(out.rglob("*.csv"))[:4]:
    print("  ", f.relative_to(out))
print(json.dumps(summary["cells"]["main"]["SIAD"], indent=1)[:300])
