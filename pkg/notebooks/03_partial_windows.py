"""
Estimation from part of a discharge
===================================

Splits each noisy trace into beginning, middle and end thirds and estimates
from each third alone. The flat middle of the curve is the hardest part.
"""

import numpy as np

from ocvalign import NOMINAL_CAPACITY_AH, AgingScenario, EstimationProblem, generate, reference_nominal_curve
from ocvalign.estimator import estimate_window, thirds

nominal = reference_nominal_curve()
cn = NOMINAL_CAPACITY_AH

are = {"beginning": [], "middle": [], "end": []}
flat = {"beginning": [], "middle": [], "end": []}
for fraction in (0.8, 0.9, 1.0):
    for seed in range(5):
        trace = generate(AgingScenario(nominal, fraction * cn, 1.0, ocv_noise_sigma=0.005, seed=seed))
        problem = EstimationProblem.from_trace(nominal, trace, cn)
        for name, window in thirds(problem.n_residuals).items():
            r = estimate_window(problem, window)
            are[name].append(100 * abs(r.capacity - fraction * cn) / (fraction * cn))
            flat[name].append(r.flatness_indicator)

for name in are:
    print("%-9s mean ARE %.4f %%  worst %.4f %%  median flatness %.2e"
          % (name, np.mean(are[name]), np.max(are[name]), np.median(flat[name])))
