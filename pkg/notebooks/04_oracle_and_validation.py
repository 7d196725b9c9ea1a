"""
Checking the optimizer and scoring a batch of cycles
====================================================

Compares the simplex answer with an exhaustive grid search, then writes a
small manifest of synthetic cycles and scores it the way the ``validate``
command does.
"""

import tempfile
from pathlib import Path

from ocvalign import NOMINAL_CAPACITY_AH, AgingScenario, EstimationProblem, aggregate, estimate, generate, io
from ocvalign import reference_nominal_curve
from ocvalign.estimator import certify, grid_oracle
from ocvalign.metrics import format_percent

nominal = reference_nominal_curve()
cn = NOMINAL_CAPACITY_AH

trace = generate(AgingScenario(nominal, 0.88 * cn, 0.95, ocv_noise_sigma=0.004, seed=3))
problem = EstimationProblem.from_trace(nominal, trace, cn)
result = estimate(problem)
c, z, best = grid_oracle(problem, 200, 200)
print("simplex  C=%.6f z0=%.6f obj=%.6e" % (result.capacity, result.z0, result.objective))
print("grid     C=%.6f z0=%.6f obj=%.6e" % (c, z, best))
print("certified:", certify(problem, result, 200, 200)[0])

# one trace file per cycle plus a manifest with the measured capacities
work = Path(tempfile.mkdtemp())
rows = ["cycle_id,trace_path,actual_capacity_ah"]
for cycle, fraction in enumerate((0.97, 0.94, 0.91, 0.88), start=1):
    t = generate(AgingScenario(nominal, fraction * cn, 1.0, ocv_noise_sigma=0.005, seed=cycle))
    io.write_trace_csv(t, work / f"cycle_{cycle}.csv")
    rows.append(f"{cycle},cycle_{cycle}.csv,{fraction * cn}")
(work / "manifest.csv").write_text("\n".join(rows) + "\n")

scored = []
for cid, path, actual in io.read_manifest(work / "manifest.csv"):
    p = EstimationProblem.from_trace(nominal, io.read_trace_csv(path), cn)
    scored.append((cid, estimate(p).capacity, actual))
report = aggregate(scored)
for row in report.per_cycle:
    print(row.cycle_id, "%.4f Ah vs %.4f Ah, ARE %s %%" % (row.estimated_ah, row.actual_ah, format_percent(row.are_percent)))
print("RMSE %.4f Ah, MAE %.4f Ah, mean ARE %.4f %%" % (report.rmse_ah, report.mae_ah, report.mean_are_percent))

# the overlay data for a plot of aged vs nominal curves
io.write_alignment_plot_data(result, problem, work / "alignment.csv")
for s in io.read_plot_data(work / "alignment.csv"):
    print(s.name, len(s.x), "points")
