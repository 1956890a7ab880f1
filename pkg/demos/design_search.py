"""Random versus coordinate-exchange designs on the 24-task benchmark.

    python3 demos/design_search.py [swaps]
"""

import sys
import warnings

import numpy as np

from iclv import io
from iclv.synthetic import DesignWarning, d_error, improve_design, random_design

swaps = int(sys.argv[1]) if len(sys.argv) > 1 else 5000
spec = io.read_design_spec(io.data_path("design_benchmark.json"))
priors = io.read_priors(io.data_path("priors.json"))

with warnings.catch_warnings():
    warnings.simplefilter("ignore", DesignWarning)
    scores = np.array([d_error(random_design(spec, s), priors) for s in range(200)])
print(f"200 random designs: median D-error {np.median(scores):.4f}, best {scores.min():.4f}")

start = random_design(spec, 0)
for n in (0, swaps // 10, swaps):
    d = d_error(improve_design(start, priors, n, seed=0), priors)
    print(f"{n:6d} swaps: D-error {d:.4f}")
print(f"duplicated start design: {d_error(start.duplicated(), priors):.4f} (half of {d_error(start, priors):.4f})")
