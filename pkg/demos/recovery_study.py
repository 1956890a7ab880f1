"""Simulate respondents from known parameters, re-estimate, compare.

    python3 demos/recovery_study.py [n_individuals] [n_draws]

The defaults (1000 respondents, 500 draws) take about 15 minutes on one core;
try 200 and 100 for a quick look.
"""

import sys
import time

import numpy as np

from iclv.estimation import EstimationSettings, ParameterLayout, estimate
from iclv.likelihood import DrawSettings
from iclv.synthetic import benchmark_spec, random_design, recovery_params, recovery_spec, shares, simulate_dataset

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
draws = int(sys.argv[2]) if len(sys.argv) > 2 else 500

truth, spec = recovery_params(), recovery_spec()
data = simulate_dataset(random_design(benchmark_spec(), 1), truth, n, seed=3)
print(f"{n} respondents, choice shares (EV1, EV2, none): {np.round(shares(data), 3)}")

t0 = time.perf_counter()


def progress(info):
    if info.iteration % 10 == 0:
        print(f"  iter {info.iteration:4d}  LL {info.log_likelihood:.3f}  max|g| {info.gradient_max:.3g}"
              f"  {time.perf_counter() - t0:.0f}s", flush=True)


res = estimate(data, spec, EstimationSettings(draw_settings=DrawSettings(n_draws=draws)), callback=progress)
print(f"converged={res.converged} ({res.message}); LL {res.final_ll:.3f}; rho^2 {res.rho_square:.4f}")

layout = ParameterLayout(spec, truth)
target = layout.natural(layout.to_vector(truth))
z = (res.estimates - target) / res.std_errors
print(f"{np.mean(np.abs(z) <= 2):.1%} of {len(z)} parameters within 2 SE of the truth\n")
print(f"{'parameter':34s}{'truth':>9s}{'estimate':>10s}{'se':>9s}{'z':>7s}")
for name, t, e, s, zi in zip(res.free_names, target, res.estimates, res.std_errors, z):
    print(f"{name:34s}{t:9.3f}{e:10.3f}{s:9.3f}{zi:7.2f}")
