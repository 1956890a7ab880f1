"""Cohort latent means, age profile minima and the six policy sweeps.

    python3 demos/policy_sweeps.py
"""

import numpy as np

from iclv import io
from iclv.model import LATENTS
from iclv.policy import DEFAULT_COHORTS, ScenarioSweep, cohort_latents, profile_minimum, scenario_sweep

params, calibration = io.reference_params()
c = calibration["ev_constant"]

print("latent means (design, environment, safety)")
for cohort in DEFAULT_COHORTS:
    print(f"  {cohort.label:13s}", "  ".join(f"{v:.3f}" for v in cohort_latents(params, cohort)))

print("\nage of the local minimum of each age curve")
for latent in LATENTS:
    print(f"  {latent:12s} {profile_minimum(params, latent):.1f}")

print(f"\nP(EV) change over each sweep, percentage points (EV constant {c:.4f})")
print("  scenario        " + "".join(f"{c.label:>14s}" for c in DEFAULT_COHORTS))
for sid in range(1, 7):
    res = scenario_sweep(params, ScenarioSweep.default(sid), ev_constant=c)
    name = res.sweep.swept_field
    row = "".join(f"{100 * res.change(k.name, k.gender):14.1f}" for k in DEFAULT_COHORTS)
    print(f"  {sid} {name:14s}{row}")

x, p = scenario_sweep(params, ScenarioSweep.default(1), ev_constant=c).curve("Gen X", "male")
print("\nGen X male, price subsidy curve:", np.round(p, 3))
